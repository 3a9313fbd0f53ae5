//! Local outlier factor with exact k-nearest neighbors (Euclidean metric).

use rayon::prelude::*;

use super::kdtree::KdTree;
use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, ScoreMap};

/// Mean reachability distances below this are treated as this, which caps the
/// local reachability density at `1 / LOF_DELTA` for duplicated points.
pub const LOF_DELTA: f64 = 1e-12;

/// LOF of every row of a row-major `count × dim` point set, with exactly `k`
/// neighbors per point (the point itself excluded, ties broken by index).
pub fn local_outlier_factor(points: &[f64], dim: usize, k: usize) -> Result<Vec<f64>> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidArgument(format!(
            "{} values do not form {dim}-dimensional points",
            points.len()
        )));
    }
    let count = points.len() / dim;
    if k == 0 || k >= count {
        return Err(Error::InvalidConfig(format!(
            "lof_neighbors {k} must be in 1..{count} (pixel count)"
        )));
    }
    let tree = KdTree::build(points, dim);
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    let mut neighbors = vec![0u32; count * k];
    let k_distance: Vec<f64> = neighbors
        .par_chunks_mut(k)
        .enumerate()
        .map(|(i, out)| {
            let found = tree.knn(point(i), k, Some(i as u32));
            for (slot, (j, _)) in out.iter_mut().zip(&found) {
                *slot = *j;
            }
            found[k - 1].1.sqrt()
        })
        .collect();

    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() };
    let lrd: Vec<f64> = neighbors
        .par_chunks(k)
        .enumerate()
        .map(|(i, nb)| {
            let p = point(i);
            let reach: f64 = nb
                .iter()
                .map(|&j| k_distance[j as usize].max(dist(p, point(j as usize))))
                .sum();
            1.0 / (reach / k as f64).max(LOF_DELTA)
        })
        .collect();

    Ok(neighbors
        .par_chunks(k)
        .enumerate()
        .map(|(i, nb)| {
            let mean: f64 = nb.iter().map(|&j| lrd[j as usize]).sum::<f64>() / k as f64;
            mean / lrd[i]
        })
        .collect())
}

pub fn lof_scores(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    cfg.validate()?;
    let scores = local_outlier_factor(image.data(), image.channels(), cfg.lof_neighbors)?;
    Ok(ScoreMap::from_parts(image.height(), image.width(), scores))
}
