//! Cluster-based anomaly detection: Mahalanobis distance to the statistics of
//! the nearest k-means background cluster.

use rayon::prelude::*;

use super::kmeans::{kmeans, nearest};
use super::stats::{background_stats, BackgroundStats};
use super::{rng_for, subsample, DetectorConfig, MAX_FIT_SAMPLES};
use crate::colorspace::flatten;
use crate::error::Result;
use crate::tensor::{ImageTensor, ScoreMap};

const MAX_ITER: usize = 10;
const SHIFT_TOL: f64 = 1e-6;

pub fn cbad_scores(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    cfg.validate()?;
    let all = flatten(image);
    let samples = subsample(&all, MAX_FIT_SAMPLES, &mut rng_for(cfg.seed, 2));
    let global = background_stats(&samples, cfg.ridge)?;
    let km = kmeans(
        &samples,
        cfg.cbad_clusters,
        MAX_ITER,
        SHIFT_TOL,
        &mut rng_for(cfg.seed, 3),
    );

    let cluster_stats: Vec<BackgroundStats> = (0..cfg.cbad_clusters)
        .map(|c| {
            let members: Vec<usize> = km
                .assignment
                .iter()
                .enumerate()
                .filter_map(|(i, &a)| (a == c).then_some(i))
                .collect();
            // Singleton clusters have no covariance; borrow the global one.
            if members.len() < 2 {
                Ok(global.clone())
            } else {
                background_stats(&samples.select_rows(&members), cfg.ridge)
            }
        })
        .collect::<Result<_>>()?;

    let scores = all
        .values()
        .par_chunks(all.cols())
        .map(|x| cluster_stats[nearest(x, &km.centroids)].mahalanobis_sq_unchecked(x))
        .collect();
    Ok(ScoreMap::from_parts(image.height(), image.width(), scores))
}
