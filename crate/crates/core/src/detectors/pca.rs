//! PCA outlier scores from the eigendecomposition of the image covariance.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::background_stats;
use super::DetectorConfig;
use crate::colorspace::flatten;
use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, ScoreMap};

/// How projections onto the principal axes become a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaMode {
    /// `Σ proj² / (λ + ε)` over the selected (largest) components. With every
    /// component selected this is the Mahalanobis distance.
    #[default]
    Weighted,
    /// Squared Euclidean distance to the hyperplane spanned by the selected
    /// components, i.e. the energy left in the discarded ones.
    Residual,
}

pub fn pca_scores(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    cfg.validate()?;
    let n = image.channels();
    let m = cfg.pca_components.unwrap_or(n);
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!("pca_components {m} out of range 1..={n}")));
    }
    let stats = background_stats(&flatten(image), cfg.ridge)?;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, stats.covariance()));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (chosen, rest) = order.split_at(m);
    let (axes, weights): (Vec<usize>, Vec<f64>) = match cfg.pca_mode {
        PcaMode::Weighted => (
            chosen.to_vec(),
            chosen
                .iter()
                .map(|&i| 1.0 / (eig.eigenvalues[i].max(0.0) + cfg.ridge))
                .collect(),
        ),
        PcaMode::Residual => (rest.to_vec(), vec![1.0; rest.len()]),
    };
    // Row-major (axis, channel) so each projection is a contiguous dot product.
    let basis: Vec<f64> = axes
        .iter()
        .flat_map(|&a| (0..n).map(move |c| (a, c)))
        .map(|(a, c)| eig.eigenvectors[(c, a)])
        .collect();
    let mean = stats.mean();

    let scores = image
        .data()
        .par_chunks(n)
        .map(|p| {
            let mut s = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let v = &basis[k * n..(k + 1) * n];
                let proj: f64 = (0..n).map(|c| v[c] * (p[c] - mean[c])).sum();
                s += w * proj * proj;
            }
            s
        })
        .collect();
    Ok(ScoreMap::from_parts(image.height(), image.width(), scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::rx_global;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_is_zero() {
        let img = ImageTensor::from_fn(5, 5, 3, |_, _, c| c as f64 * 0.3);
        assert!(pca_scores(&img, &DetectorConfig::default())
            .unwrap()
            .scores()
            .iter()
            .all(|&s| s == 0.0));
    }

    #[test]
    fn full_rank_equals_rxg() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = ImageTensor::from_fn(10, 10, 4, |_, _, _| rng.gen());
        let cfg = DetectorConfig::default();
        let p = pca_scores(&img, &cfg).unwrap();
        let g = rx_global(&img, &cfg).unwrap();
        for (a, b) in p.scores().iter().zip(g.scores()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn off_line_point_dominates_residual() {
        // 60 points on a line through 3-D space plus one point off it.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dir = [0.6, 0.48, 0.64];
        let mut data = Vec::new();
        for _ in 0..60 {
            let t: f64 = rng.gen_range(-1.0..1.0);
            data.extend(dir.iter().map(|d| 0.5 + 0.3 * t * d));
        }
        data.extend([0.5, 0.9, 0.2]);
        let img = ImageTensor::new(1, 61, 3, data).unwrap();
        let cfg = DetectorConfig {
            pca_components: Some(1),
            pca_mode: PcaMode::Residual,
            ..Default::default()
        };
        let s = pca_scores(&img, &cfg).unwrap();
        assert_eq!(s.argmax(), 60);
        let runner_up = s.scores()[..60].iter().copied().fold(0.0, f64::max);
        assert!(s.scores()[60] > runner_up);
    }

    #[test]
    fn component_range_checked() {
        let img = ImageTensor::zeros(3, 3, 3);
        let cfg = DetectorConfig {
            pca_components: Some(4),
            ..Default::default()
        };
        assert!(pca_scores(&img, &cfg).is_err());
    }
}
