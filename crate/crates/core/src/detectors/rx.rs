//! Reed-Xiaoli detectors: global, modified (norm-scaled) and local windowed.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::stats::{
    background_stats_of, cholesky_in_place, cholesky_quad_form, invert_spd, mahalanobis_rows, BackgroundStats,
};
use super::DetectorConfig;
use crate::error::Result;
use crate::tensor::{ImageTensor, ScoreMap};

/// Below this distance from the mean, RXM scores are defined as 0.
pub const RXM_DELTA: f64 = 1e-12;

fn global_stats(image: &ImageTensor, cfg: &DetectorConfig) -> Result<BackgroundStats> {
    cfg.validate()?;
    background_stats_of(image.data(), image.channels(), cfg.ridge)
}

/// Mahalanobis distance of every pixel to whole-image statistics.
pub fn rx_global(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    let stats = global_stats(image, cfg)?;
    let scores = mahalanobis_rows(image.data(), &stats);
    Ok(ScoreMap::from_parts(image.height(), image.width(), scores))
}

/// RXG divided by the Euclidean distance to the mean.
pub fn rx_modified(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    let stats = global_stats(image, cfg)?;
    let mean = stats.mean();
    let mut scores = mahalanobis_rows(image.data(), &stats);
    scores
        .par_iter_mut()
        .zip(image.data().par_chunks_exact(image.channels()))
        .for_each(|(s, p)| {
            let norm = p.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            *s = if norm < RXM_DELTA { 0.0 } else { *s / norm };
        });
    Ok(ScoreMap::from_parts(image.height(), image.width(), scores))
}

/// Summed-area tables of the centered first and second moments of every
/// channel (pair), so any rectangle's moments cost O(n²).
struct MomentTables {
    width: usize,
    stride: usize,
    table: Vec<f64>,
}

impl MomentTables {
    fn build(image: &ImageTensor, center: &[f64]) -> Self {
        let (h, w, n) = (image.height(), image.width(), image.channels());
        let stride = n + n * (n + 1) / 2;
        let tw = w + 1;
        let mut table = vec![0.0; (h + 1) * tw * stride];
        let mut row_acc = vec![0.0; stride];
        let mut d = vec![0.0; n];
        for y in 0..h {
            row_acc.fill(0.0);
            for x in 0..w {
                for (c, v) in image.pixel(y, x).iter().enumerate() {
                    d[c] = v - center[c];
                }
                let mut k = 0;
                for c in 0..n {
                    row_acc[k] += d[c];
                    k += 1;
                }
                for i in 0..n {
                    for j in i..n {
                        row_acc[k] += d[i] * d[j];
                        k += 1;
                    }
                }
                let above = (y * tw + x + 1) * stride;
                let here = ((y + 1) * tw + x + 1) * stride;
                for s in 0..stride {
                    table[here + s] = table[above + s] + row_acc[s];
                }
            }
        }
        Self {
            width: w,
            stride,
            table,
        }
    }

    /// Adds `sign ×` the moments of rows `y0..y1`, columns `x0..x1` into `out`.
    fn accumulate(&self, y0: usize, x0: usize, y1: usize, x1: usize, sign: f64, out: &mut [f64]) {
        let tw = self.width + 1;
        let at = |y: usize, x: usize| (y * tw + x) * self.stride;
        let (a, b, c, d) = (at(y1, x1), at(y0, x1), at(y1, x0), at(y0, x0));
        for s in 0..self.stride {
            out[s] += sign * (self.table[a + s] - self.table[b + s] - self.table[c + s] + self.table[d + s]);
        }
    }
}

fn window(center: usize, half: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half + 1).min(len))
}

/// Local RX: statistics come from the `bg_win` square around each pixel with
/// the `guard_win` core removed. Windows are clipped at the border; when fewer
/// than `2n` samples survive, whole-image statistics are used instead.
pub fn rx_local(image: &ImageTensor, cfg: &DetectorConfig) -> Result<ScoreMap> {
    let global = global_stats(image, cfg)?;
    let (h, w, n) = (image.height(), image.width(), image.channels());
    let center = global.mean().to_vec();
    let tables = MomentTables::build(image, &center);
    let (half_bg, half_guard) = (cfg.bg_win / 2, cfg.guard_win / 2);
    let min_count = (2 * n).max(2);
    let ridge = cfg.ridge;

    let mut scores = vec![0.0; h * w];
    scores.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut moments = vec![0.0; tables.stride];
        let mut cov = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let (by0, by1) = window(y, half_bg, h);
        let (gy0, gy1) = window(y, half_guard, h);
        for (x, out) in row.iter_mut().enumerate() {
            let (bx0, bx1) = window(x, half_bg, w);
            let (gx0, gx1) = window(x, half_guard, w);
            let count = (by1 - by0) * (bx1 - bx0) - (gy1 - gy0) * (gx1 - gx0);
            let pixel = image.pixel(y, x);
            if count < min_count {
                *out = global.mahalanobis_sq_unchecked(pixel);
                continue;
            }
            moments.fill(0.0);
            tables.accumulate(by0, bx0, by1, bx1, 1.0, &mut moments);
            tables.accumulate(gy0, gx0, gy1, gx1, -1.0, &mut moments);
            let cnt = count as f64;
            for c in 0..n {
                d[c] = pixel[c] - center[c] - moments[c] / cnt;
            }
            let mut k = n;
            for i in 0..n {
                for j in i..n {
                    let v = (moments[k] - moments[i] * moments[j] / cnt) / (cnt - 1.0);
                    cov[i * n + j] = v;
                    cov[j * n + i] = v;
                    k += 1;
                }
                cov[i * n + i] += ridge;
            }
            *out = if cholesky_in_place(&mut cov, n) {
                cholesky_quad_form(&cov, n, &d, &mut scratch)
            } else {
                singular_quad_form(&moments, n, cnt, ridge, &d)
            };
        }
    });
    Ok(ScoreMap::from_parts(h, w, scores))
}

/// Slow path for windows whose regularized covariance is not positive definite
/// (only possible with `ridge == 0`).
fn singular_quad_form(moments: &[f64], n: usize, cnt: f64, ridge: f64, d: &[f64]) -> f64 {
    let mut m = DMatrix::zeros(n, n);
    let mut k = n;
    for i in 0..n {
        for j in i..n {
            let v = (moments[k] - moments[i] * moments[j] / cnt) / (cnt - 1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
        m[(i, i)] += ridge;
    }
    let inv = invert_spd(m);
    let dv = nalgebra::DVector::from_column_slice(d);
    (dv.transpose() * inv * &dv)[(0, 0)].max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> DetectorConfig {
        DetectorConfig::default()
    }

    #[test]
    fn constant_image_scores_zero() {
        let img = ImageTensor::from_fn(12, 12, 3, |_, _, c| 0.2 + 0.1 * c as f64);
        let small = DetectorConfig {
            guard_win: 3,
            bg_win: 5,
            ..cfg()
        };
        for s in [
            rx_global(&img, &cfg()).unwrap(),
            rx_modified(&img, &cfg()).unwrap(),
            rx_local(&img, &small).unwrap(),
        ] {
            assert!(s.scores().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_distinct_pixel_is_strict_max() {
        let mut img = ImageTensor::from_fn(10, 10, 3, |y, x, c| 0.4 + 0.01 * ((y * 7 + x * 3 + c) % 5) as f64);
        img.pixel_mut(6, 2).copy_from_slice(&[0.9, 0.1, 0.8]);
        let s = rx_global(&img, &cfg()).unwrap();
        let peak = s.get(6, 2);
        let others = s
            .scores()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 6 * 10 + 2)
            .all(|(_, &v)| v < peak);
        assert!(others);
    }

    #[test]
    fn rxm_identity_metric() {
        // With K = I and ε = 0 a pixel at (2, 0) from the mean scores RXG 4, RXM 2.
        let stats = BackgroundStats::from_moments(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        let rxg = stats.mahalanobis_sq(&[2.0, 0.0]).unwrap();
        assert!((rxg - 4.0).abs() < 1e-12);
        assert!((rxg / 2.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rxm_is_rxg_over_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = ImageTensor::from_fn(9, 11, 4, |_, _, _| rng.gen());
        let g = rx_global(&img, &cfg()).unwrap();
        let m = rx_modified(&img, &cfg()).unwrap();
        let stats = crate::detectors::background_stats(&crate::colorspace::flatten(&img), 1e-6).unwrap();
        for (i, p) in img.pixels().enumerate() {
            let norm: f64 = p
                .iter()
                .zip(stats.mean())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > RXM_DELTA {
                let expected = g.scores()[i] / norm;
                assert!((m.scores()[i] - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn rxm_zero_at_mean() {
        // Symmetric data whose centre pixel equals the mean exactly.
        let vals = [0.0, 1.0, 0.5, 0.0, 1.0];
        let img = ImageTensor::from_fn(1, 5, 1, |_, x, _| vals[x]);
        let m = rx_modified(&img, &cfg()).unwrap();
        assert_eq!(m.scores()[2], 0.0);
    }

    #[test]
    fn invalid_windows_rejected() {
        let img = ImageTensor::zeros(4, 4, 3);
        let bad = DetectorConfig {
            guard_win: 5,
            bg_win: 5,
            ..cfg()
        };
        assert!(rx_local(&img, &bad).is_err());
    }

    #[test]
    fn tiny_image_falls_back_to_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = ImageTensor::from_fn(3, 3, 3, |_, _, _| rng.gen());
        // bg 55 / guard 33 leaves no annulus on a 3x3 image.
        let l = rx_local(&img, &cfg()).unwrap();
        let g = rx_global(&img, &cfg()).unwrap();
        assert_eq!(l, g);
    }
}
