//! The seven unsupervised color anomaly detectors.
//!
//! Every detector maps an `H × W × n` image to a [`ScoreMap`] of finite,
//! non-negative scores where larger means more anomalous.

mod cbad;
mod gmm;
mod kdtree;
mod kmeans;
mod lof;
mod pca;
mod rx;
mod stats;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, SampleMatrix, ScoreMap};

pub use cbad::cbad_scores;
pub use gmm::gmm_scores;
pub use lof::{local_outlier_factor, lof_scores};
pub use pca::{pca_scores, PcaMode};
pub use rx::{rx_global, rx_local, rx_modified, RXM_DELTA};
pub use stats::{background_stats, mahalanobis_sq, BackgroundStats};

/// Largest number of pixels the mixture and clustering fits look at.
pub const MAX_FIT_SAMPLES: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// RXL inner (excluded) window, odd.
    pub guard_win: usize,
    /// RXL outer window, odd and larger than `guard_win`.
    pub bg_win: usize,
    /// PCA components; `None` uses all channels.
    pub pca_components: Option<usize>,
    pub pca_mode: PcaMode,
    pub gmm_components: usize,
    pub cbad_clusters: usize,
    pub lof_neighbors: usize,
    /// Added to every covariance diagonal before inversion.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            guard_win: 33,
            bg_win: 55,
            pca_components: None,
            pca_mode: PcaMode::Weighted,
            gmm_components: 2,
            cbad_clusters: 2,
            lof_neighbors: 200,
            ridge: 1e-6,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.guard_win.is_multiple_of(2) || self.bg_win.is_multiple_of(2) {
            return bad(format!(
                "window sizes must be odd (guard {}, bg {})",
                self.guard_win, self.bg_win
            ));
        }
        if self.bg_win <= self.guard_win {
            return bad(format!(
                "bg_win {} must exceed guard_win {}",
                self.bg_win, self.guard_win
            ));
        }
        if self.gmm_components == 0 || self.cbad_clusters == 0 || self.lof_neighbors == 0 {
            return bad("component, cluster and neighbor counts must be >= 1".into());
        }
        if self.pca_components == Some(0) {
            return bad("pca_components must be >= 1".into());
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return bad(format!("ridge must be finite and >= 0, got {}", self.ridge));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rxg,
    Rxm,
    Rxl,
    Pca,
    Gmm,
    Cbad,
    Lof,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rxg,
        Method::Rxm,
        Method::Rxl,
        Method::Pca,
        Method::Gmm,
        Method::Cbad,
        Method::Lof,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Method::Rxg => "rxg",
            Method::Rxm => "rxm",
            Method::Rxl => "rxl",
            Method::Pca => "pca",
            Method::Gmm => "gmm",
            Method::Cbad => "cbad",
            Method::Lof => "lof",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token().to_ascii_uppercase())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.token().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownToken {
                token: s.to_string(),
                expected: "rxg|rxm|rxl|pca|gmm|cbad|lof",
            })
    }
}

/// Scores plus the wall-clock time spent in the scoring call itself.
#[derive(Debug, Clone)]
pub struct Detection {
    pub scores: ScoreMap,
    pub elapsed: Duration,
}

/// Scores `image` with `method`. Input preparation (color conversion,
/// stacking) happens before this call and is not timed.
pub fn detect(method: Method, image: &ImageTensor, cfg: &DetectorConfig) -> Result<Detection> {
    let start = Instant::now();
    let scores = match method {
        Method::Rxg => rx_global(image, cfg),
        Method::Rxm => rx_modified(image, cfg),
        Method::Rxl => rx_local(image, cfg),
        Method::Pca => pca_scores(image, cfg),
        Method::Gmm => gmm_scores(image, cfg),
        Method::Cbad => cbad_scores(image, cfg),
        Method::Lof => lof_scores(image, cfg),
    }?;
    Ok(Detection {
        scores,
        elapsed: start.elapsed(),
    })
}

/// Seeded subsample of at most `max` rows, kept in ascending row order.
pub(crate) fn subsample(samples: &SampleMatrix, max: usize, rng: &mut ChaCha8Rng) -> SampleMatrix {
    if samples.rows() <= max {
        return samples.clone();
    }
    let mut rows = index::sample(rng, samples.rows(), max).into_vec();
    rows.sort_unstable();
    samples.select_rows(&rows)
}

/// Deterministic per-purpose RNG derived from the configured seed.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tokens() {
        for m in Method::ALL {
            assert_eq!(m.token().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("rxx".parse::<Method>(), Err(Error::UnknownToken { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let even = DetectorConfig {
            guard_win: 32,
            ..Default::default()
        };
        assert!(even.validate().is_err());
        let inverted = DetectorConfig {
            guard_win: 55,
            bg_win: 33,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
        let zero = DetectorConfig {
            lof_neighbors: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }
}
