//! Brute-force reference implementations used as test oracles. Everything is
//! recomputed from scratch per pixel with plain nested loops.

#![allow(dead_code)]

use msad::ImageTensor;
use rand::Rng;

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize, n: usize) -> ImageTensor {
    ImageTensor::from_fn(h, w, n, |_, _, _| rng.gen::<f64>())
}

/// Sample mean and covariance (divisor `len − 1`).
pub fn mean_cov(samples: &[&[f64]]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = samples[0].len();
    let m = samples.len() as f64;
    let mean: Vec<f64> = (0..n).map(|c| samples.iter().map(|s| s[c]).sum::<f64>() / m).collect();
    let cov = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / (m - 1.0))
                .collect()
        })
        .collect();
    (mean, cov)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for j in 0..n {
                    a[r][j] -= f * a[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

pub fn mahalanobis(r: &[f64], mean: &[f64], cov: &[Vec<f64>], ridge: f64) -> f64 {
    let n = r.len();
    let mut reg = cov.to_vec();
    for (i, row) in reg.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let inv = inverse(reg);
    let d: Vec<f64> = (0..n).map(|c| r[c] - mean[c]).collect();
    (0..n)
        .map(|i| (0..n).map(|j| d[i] * inv[i][j] * d[j]).sum::<f64>())
        .sum()
}

fn all_pixels(img: &ImageTensor) -> Vec<&[f64]> {
    img.pixels().collect()
}

pub fn rx_global(img: &ImageTensor, ridge: f64) -> Vec<f64> {
    let px = all_pixels(img);
    let (mean, cov) = mean_cov(&px);
    px.iter().map(|p| mahalanobis(p, &mean, &cov, ridge)).collect()
}

pub fn rx_modified(img: &ImageTensor, ridge: f64) -> Vec<f64> {
    let px = all_pixels(img);
    let (mean, cov) = mean_cov(&px);
    px.iter()
        .map(|p| {
            let norm = p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if norm < 1e-12 {
                0.0
            } else {
                mahalanobis(p, &mean, &cov, ridge) / norm
            }
        })
        .collect()
}

/// Pixels of the `bg × bg` square around (y, x) minus the `guard × guard`
/// core, both clipped to the image.
pub fn annulus(img: &ImageTensor, y: usize, x: usize, guard: usize, bg: usize) -> Vec<&[f64]> {
    let (hb, hg) = ((bg / 2) as i64, (guard / 2) as i64);
    let mut out = Vec::new();
    for yy in 0..img.height() as i64 {
        for xx in 0..img.width() as i64 {
            let (dy, dx) = ((yy - y as i64).abs(), (xx - x as i64).abs());
            let in_bg = dy <= hb && dx <= hb;
            let in_guard = dy <= hg && dx <= hg;
            if in_bg && !in_guard {
                out.push(img.pixel(yy as usize, xx as usize));
            }
        }
    }
    out
}

/// Local RX with explicit per-pixel window recomputation. Pixels whose
/// clipped annulus holds fewer than `2n` samples use whole-image stats.
pub fn rx_local(img: &ImageTensor, guard: usize, bg: usize, ridge: f64) -> Vec<f64> {
    let n = img.channels();
    let px = all_pixels(img);
    let (gmean, gcov) = mean_cov(&px);
    let mut out = Vec::with_capacity(px.len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let ring = annulus(img, y, x, guard, bg);
            let p = img.pixel(y, x);
            if ring.len() < 2 * n {
                out.push(mahalanobis(p, &gmean, &gcov, ridge));
            } else {
                let (mean, cov) = mean_cov(&ring);
                out.push(mahalanobis(p, &mean, &cov, ridge));
            }
        }
    }
    out
}

/// Largest relative error, with the denominator floored at `floor`.
pub fn max_rel_err(got: &[f64], want: &[f64], floor: f64) -> f64 {
    assert_eq!(got.len(), want.len());
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / w.abs().max(floor))
        .fold(0.0, f64::max)
}
