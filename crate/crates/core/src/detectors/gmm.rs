//! Full-covariance Gaussian mixture fitted by EM; pixels are scored by their
//! negative log-likelihood under the mixture.

use rayon::prelude::*;

use super::kmeans::{kmeans_plus_plus, nearest};
use super::stats::{background_stats, cholesky_in_place, cholesky_quad_form};
use super::{rng_for, subsample, DetectorConfig, MAX_FIT_SAMPLES};
use crate::colorspace::flatten;
use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, SampleMatrix, ScoreMap};

const MAX_ITER: usize = 100;
/// Convergence threshold on the change of mean log-likelihood.
const TOL: f64 = 1e-3;
const RESTARTS: u64 = 3;
/// Fixed reduction granularity; sums are combined in chunk order so the fit
/// does not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    chol: Vec<f64>,
    /// `ln w − ½(n ln 2π + ln det Σ)`.
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: &[f64], ridge: f64) -> Option<Self> {
        let n = mean.len();
        let mut jitter = ridge;
        for _ in 0..8 {
            let mut chol = cov.to_vec();
            for i in 0..n {
                chol[i * n + i] += jitter;
            }
            if cholesky_in_place(&mut chol, n) {
                let log_det: f64 = (0..n).map(|i| 2.0 * chol[i * n + i].ln()).sum();
                let log_norm = weight.ln() - 0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
                return Some(Self { mean, chol, log_norm });
            }
            jitter = if jitter > 0.0 { jitter * 10.0 } else { 1e-10 };
        }
        None
    }

    fn log_prob(&self, x: &[f64], d: &mut [f64], scratch: &mut [f64]) -> f64 {
        for (i, v) in x.iter().enumerate() {
            d[i] = v - self.mean[i];
        }
        self.log_norm - 0.5 * cholesky_quad_form(&self.chol, self.mean.len(), d, scratch)
    }
}

#[derive(Debug, Clone)]
struct Mixture {
    dim: usize,
    components: Vec<Component>,
}

impl Mixture {
    /// Per-component log joint probabilities into `out`; returns their log-sum-exp.
    fn log_joint(&self, x: &[f64], out: &mut [f64], d: &mut [f64], scratch: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.log_prob(x, d, scratch);
            max = max.max(*o);
        }
        max + out.iter().map(|o| (o - max).exp()).sum::<f64>().ln()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let mut out = vec![0.0; self.components.len()];
        let (mut d, mut scratch) = (vec![0.0; n], vec![0.0; n]);
        self.log_joint(x, &mut out, &mut d, &mut scratch)
    }
}

/// Responsibility-weighted sufficient statistics.
#[derive(Debug, Clone)]
struct Moments {
    weight: Vec<f64>,
    sum: Vec<f64>,
    outer: Vec<f64>,
    log_likelihood: f64,
}

impl Moments {
    fn zeros(k: usize, n: usize) -> Self {
        Self {
            weight: vec![0.0; k],
            sum: vec![0.0; k * n],
            outer: vec![0.0; k * n * n],
            log_likelihood: 0.0,
        }
    }

    fn merge(&mut self, other: &Moments) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
    }
}

fn e_step(mix: &Mixture, samples: &SampleMatrix) -> Moments {
    let (k, n) = (mix.components.len(), mix.dim);
    let partials: Vec<Moments> = samples
        .values()
        .par_chunks(CHUNK * n)
        .map(|chunk| {
            let mut m = Moments::zeros(k, n);
            let mut lj = vec![0.0; k];
            let (mut d, mut scratch) = (vec![0.0; n], vec![0.0; n]);
            for x in chunk.chunks_exact(n) {
                let lse = mix.log_joint(x, &mut lj, &mut d, &mut scratch);
                m.log_likelihood += lse;
                for c in 0..k {
                    let r = (lj[c] - lse).exp();
                    m.weight[c] += r;
                    let sum = &mut m.sum[c * n..(c + 1) * n];
                    for i in 0..n {
                        sum[i] += r * x[i];
                    }
                    let outer = &mut m.outer[c * n * n..(c + 1) * n * n];
                    for i in 0..n {
                        let rx = r * x[i];
                        for j in i..n {
                            outer[i * n + j] += rx * x[j];
                        }
                    }
                }
            }
            m
        })
        .collect();
    let mut total = Moments::zeros(k, n);
    for p in &partials {
        total.merge(p);
    }
    total
}

fn m_step(mom: &Moments, previous: &Mixture, rows: usize, global_cov: &[f64], ridge: f64) -> Option<Mixture> {
    let n = previous.dim;
    let k = previous.components.len();
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let nk = mom.weight[c];
        // A component that lost (almost) all mass keeps its mean and falls back
        // to the global covariance instead of collapsing to a point.
        if nk < n as f64 + 1.0 {
            let w = (nk / rows as f64).max(1e-12);
            components.push(Component::new(
                w,
                previous.components[c].mean.clone(),
                global_cov,
                ridge,
            )?);
            continue;
        }
        let mean: Vec<f64> = mom.sum[c * n..(c + 1) * n].iter().map(|s| s / nk).collect();
        let outer = &mom.outer[c * n * n..(c + 1) * n * n];
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = outer[i * n + j] / nk - mean[i] * mean[j];
                cov[i * n + j] = v;
                cov[j * n + i] = v;
            }
        }
        components.push(Component::new(nk / rows as f64, mean, &cov, ridge)?);
    }
    Some(Mixture { dim: n, components })
}

fn initialize(
    samples: &SampleMatrix,
    k: usize,
    global_cov: &[f64],
    ridge: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<Mixture> {
    let n = samples.cols();
    let centers = kmeans_plus_plus(samples, k, rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, r) in samples.iter_rows().enumerate() {
        members[nearest(r, &centers)].push(i);
    }
    let mut components = Vec::with_capacity(k);
    for (c, idx) in members.iter().enumerate() {
        let weight = (idx.len() as f64 / samples.rows() as f64).max(1e-12);
        let comp = if idx.len() > n {
            let stats = background_stats(&samples.select_rows(idx), 0.0).ok()?;
            Component::new(weight, stats.mean().to_vec(), stats.covariance(), ridge)
        } else {
            Component::new(weight, centers[c].clone(), global_cov, ridge)
        };
        components.push(comp?);
    }
    Some(Mixture { dim: n, components })
}

/// Runs one EM fit; returns the mixture and its final mean log-likelihood.
fn fit_once(
    samples: &SampleMatrix,
    k: usize,
    global_cov: &[f64],
    ridge: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<(Mixture, f64)> {
    let rows = samples.rows();
    let mut mix = initialize(samples, k, global_cov, ridge, rng)?;
    let mut prev = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    for _ in 0..MAX_ITER {
        let mom = e_step(&mix, samples);
        ll = mom.log_likelihood / rows as f64;
        if !ll.is_finite() {
            return None;
        }
        mix = m_step(&mom, &mix, rows, global_cov, ridge)?;
        if (ll - prev).abs() < TOL {
            break;
        }
        prev = ll;
    }
    Some((mix, ll))
}

pub fn gmm_scores(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    cfg.validate()?;
    let all = flatten(image);
    if all.rows() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: all.rows(),
        });
    }
    let samples = subsample(&all, MAX_FIT_SAMPLES, &mut rng_for(cfg.seed, 1));
    let global = background_stats(&samples, 0.0)?;

    let mut best: Option<(Mixture, f64)> = None;
    for restart in 0..RESTARTS {
        let mut rng = rng_for(cfg.seed, 100 + restart);
        if let Some((mix, ll)) = fit_once(&samples, cfg.gmm_components, global.covariance(), cfg.ridge, &mut rng) {
            if best.as_ref().is_none_or(|(_, b)| ll > *b) {
                best = Some((mix, ll));
            }
        }
    }
    let (mix, _) = best.ok_or_else(|| Error::EmFailure(format!("all {RESTARTS} restarts diverged")))?;

    let mut nll: Vec<f64> = all
        .values()
        .par_chunks(all.cols())
        .map(|x| -mix.log_density(x))
        .collect();
    if let Some(bad) = nll.iter().position(|v| !v.is_finite()) {
        return Err(Error::EmFailure(format!("non-finite likelihood at pixel {bad}")));
    }
    // Shift so the most likely pixel scores 0; ranking is unchanged.
    let min = nll.iter().copied().fold(f64::INFINITY, f64::min);
    for v in &mut nll {
        *v -= min;
    }
    Ok(ScoreMap::from_parts(image.height(), image.width(), nll))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs_with_outlier() -> ImageTensor {
        // 98 pixels in two tight blobs, one far outlier.
        let mut data = Vec::new();
        for i in 0..49 {
            let e = ((i * 37) % 11) as f64 * 0.002;
            data.extend([0.2 + e, 0.2 - e, 0.3]);
            data.extend([0.7 - e, 0.75, 0.6 + e]);
        }
        data.extend([0.95, 0.05, 0.95]);
        ImageTensor::new(1, 99, 3, data).unwrap()
    }

    #[test]
    fn outlier_gets_max_score() {
        let img = two_blobs_with_outlier();
        let s = gmm_scores(&img, &DetectorConfig::default()).unwrap();
        assert_eq!(s.argmax(), 98);
        assert!(s.scores().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn seeded_determinism() {
        let img = two_blobs_with_outlier();
        let cfg = DetectorConfig {
            seed: 17,
            ..Default::default()
        };
        let a = gmm_scores(&img, &cfg).unwrap();
        let b = gmm_scores(&img, &cfg).unwrap();
        assert_eq!(
            a.scores().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.scores().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn constant_image_scores_equal() {
        let img = ImageTensor::from_fn(6, 6, 3, |_, _, c| 0.1 * c as f64);
        let s = gmm_scores(&img, &DetectorConfig::default()).unwrap();
        assert!(s.scores().iter().all(|&v| v == s.scores()[0]));
    }

    #[test]
    fn likelihood_matches_closed_form_single_gaussian() {
        // One component fitted to data reproduces the sample mean and the
        // divisor-N covariance, so the score is half the Mahalanobis distance
        // under that covariance (up to the additive shift).
        let data: Vec<f64> = vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0, 1.0, 1.0];
        let img = ImageTensor::new(1, 5, 2, data).unwrap();
        let cfg = DetectorConfig {
            gmm_components: 1,
            ridge: 0.0,
            ..Default::default()
        };
        let s = gmm_scores(&img, &cfg).unwrap();
        // Covariance diag(0.8, 0.8): corners are 2/0.8 = 2.5 away, centre 0.
        assert!(s.scores()[4].abs() < 1e-9);
        for i in 0..4 {
            assert!((s.scores()[i] - 0.5 * 2.5).abs() < 1e-6, "{}", s.scores()[i]);
        }
    }
}
