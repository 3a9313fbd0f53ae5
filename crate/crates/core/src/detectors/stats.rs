//! Mean/covariance estimation and the Mahalanobis quadratic form.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::SampleMatrix;

/// Mean, sample covariance and the ridge-regularized inverse `(K + εI)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundStats {
    dim: usize,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    inverse: Vec<f64>,
    ridge: f64,
}

impl BackgroundStats {
    /// Builds stats from a mean and a row-major `n × n` covariance.
    pub fn from_moments(mean: Vec<f64>, covariance: Vec<f64>, ridge: f64) -> Result<Self> {
        let dim = mean.len();
        if covariance.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "covariance has {} entries for dimension {dim}",
                covariance.len()
            )));
        }
        if !(ridge >= 0.0) {
            return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
        }
        let mut regularized = DMatrix::from_row_slice(dim, dim, &covariance);
        for i in 0..dim {
            regularized[(i, i)] += ridge;
        }
        let inverse = invert_spd(regularized);
        Ok(Self {
            dim,
            mean,
            covariance,
            inverse: inverse.transpose().as_slice().to_vec(),
            ridge,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major sample covariance (divisor `rows − 1`).
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// Row-major `(K + εI)⁻¹`.
    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn mahalanobis_sq(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} against {}-dimensional stats",
                r.len(),
                self.dim
            )));
        }
        Ok(self.mahalanobis_sq_unchecked(r))
    }

    /// Same evaluation order as the batched kernels, so single-pixel and
    /// whole-image scores agree bitwise.
    pub(crate) fn mahalanobis_sq_unchecked(&self, r: &[f64]) -> f64 {
        let n = self.dim;
        let inv = &self.inverse;
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = inv[i * n + i] * (r[i] - self.mean[i]);
            for j in i + 1..n {
                s += (inv[i * n + j] + inv[j * n + i]) * (r[j] - self.mean[j]);
            }
            acc += (r[i] - self.mean[i]) * s;
        }
        acc.max(0.0)
    }
}

/// Inverts a symmetric positive semi-definite matrix, falling back to the
/// pseudo-inverse when it is singular.
pub(crate) fn invert_spd(m: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        let inv = ch.inverse();
        return (&inv + inv.transpose()) * 0.5;
    }
    if let Some(inv) = m.clone().try_inverse() {
        return inv;
    }
    m.pseudo_inverse(1e-12).expect("non-negative epsilon")
}

/// Column means, sample covariance with divisor `rows − 1`, and the inverse of
/// `covariance + ridge·I`.
pub fn background_stats(samples: &SampleMatrix, ridge: f64) -> Result<BackgroundStats> {
    background_stats_of(samples.values(), samples.cols(), ridge)
}

/// [`background_stats`] over a row-major buffer of `n`-wide rows.
pub(crate) fn background_stats_of(data: &[f64], n: usize, ridge: f64) -> Result<BackgroundStats> {
    let rows = data.len().checked_div(n).unwrap_or(0);
    if rows < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: rows });
    }
    let (mean, mut cov) = match n {
        3 => scatter_fixed::<3>(data),
        4 => scatter_fixed::<4>(data),
        _ => scatter_dyn(data, n),
    };
    let denom = (rows - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / denom;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    BackgroundStats::from_moments(mean, cov, ridge)
}

// Both scatter kernels accumulate offsets from the first row so constant
// data yields an exact mean and a zero scatter. Only the upper triangle of
// the scatter is filled.

fn scatter_fixed<const N: usize>(data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let rows = data.len() / N;
    let origin: [f64; N] = std::array::from_fn(|c| data[c]);
    let mut sum = [0.0; N];
    for row in data.chunks_exact(N) {
        for c in 0..N {
            sum[c] += row[c] - origin[c];
        }
    }
    let mean: [f64; N] = std::array::from_fn(|c| origin[c] + sum[c] / rows as f64);
    let mut acc = [[0.0; N]; N];
    for row in data.chunks_exact(N) {
        let d: [f64; N] = std::array::from_fn(|c| row[c] - mean[c]);
        for i in 0..N {
            for j in i..N {
                acc[i][j] += d[i] * d[j];
            }
        }
    }
    (mean.to_vec(), acc.iter().flatten().copied().collect())
}

fn scatter_dyn(data: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = data.len() / n;
    let origin = &data[..n];
    let mut mean = vec![0.0; n];
    for row in data.chunks_exact(n) {
        for ((m, v), o) in mean.iter_mut().zip(row).zip(origin) {
            *m += v - o;
        }
    }
    for (m, o) in mean.iter_mut().zip(origin) {
        *m = o + *m / rows as f64;
    }
    let mut cov = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for row in data.chunks_exact(n) {
        for i in 0..n {
            d[i] = row[i] - mean[i];
        }
        for i in 0..n {
            for j in i..n {
                cov[i * n + j] += d[i] * d[j];
            }
        }
    }
    (mean, cov)
}

/// Mahalanobis distance of every `n`-wide row of `data` to `stats`.
pub(crate) fn mahalanobis_rows(data: &[f64], stats: &BackgroundStats) -> Vec<f64> {
    match stats.dim {
        3 => mahalanobis_rows_fixed::<3>(data, stats),
        4 => mahalanobis_rows_fixed::<4>(data, stats),
        n => data
            .par_chunks_exact(n)
            .with_min_len(ROWS_PER_TASK)
            .map(|r| stats.mahalanobis_sq_unchecked(r))
            .collect(),
    }
}

const ROWS_PER_TASK: usize = 4096;

fn mahalanobis_rows_fixed<const N: usize>(data: &[f64], stats: &BackgroundStats) -> Vec<f64> {
    let mean: [f64; N] = std::array::from_fn(|c| stats.mean[c]);
    // The inverse is symmetric: fold each off-diagonal pair into one doubled
    // upper-triangle coefficient.
    let coef: [[f64; N]; N] = std::array::from_fn(|i| {
        std::array::from_fn(|j| match j.cmp(&i) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => stats.inverse[i * N + i],
            std::cmp::Ordering::Greater => stats.inverse[i * N + j] + stats.inverse[j * N + i],
        })
    });
    data.par_chunks_exact(N)
        .with_min_len(ROWS_PER_TASK)
        .map(|r| {
            let d: [f64; N] = std::array::from_fn(|c| r[c] - mean[c]);
            let mut acc = 0.0;
            for i in 0..N {
                let mut s = 0.0;
                for j in i..N {
                    s += coef[i][j] * d[j];
                }
                acc += d[i] * s;
            }
            acc.max(0.0)
        })
        .collect()
}

/// `(r − μ)ᵀ (K + εI)⁻¹ (r − μ)`.
pub fn mahalanobis_sq(r: &[f64], stats: &BackgroundStats) -> Result<f64> {
    stats.mahalanobis_sq(r)
}

/// In-place Cholesky factorization of a row-major SPD matrix into its lower
/// factor. Returns `false` if the matrix is not positive definite.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) {
            return false;
        }
        let l = diag.sqrt();
        a[j * n + j] = l;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l;
        }
    }
    true
}

/// `‖L⁻¹ d‖²` for a lower Cholesky factor `L`, i.e. `dᵀ (LLᵀ)⁻¹ d`.
pub(crate) fn cholesky_quad_form(l: &[f64], n: usize, d: &[f64], scratch: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = d[i];
        for k in 0..i {
            s -= l[i * n + k] * scratch[k];
        }
        let z = s / l[i * n + i];
        scratch[i] = z;
        acc += z * z;
    }
    acc
}
