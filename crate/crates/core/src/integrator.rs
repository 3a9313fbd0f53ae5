//! Integral images: the per-pixel mean of a focal-plane aligned view stack.

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Averages aligned views sample by sample.
pub fn integrate(views: &[ImageTensor]) -> Result<ImageTensor> {
    let first = views
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot integrate an empty view list".into()))?;
    let mut acc = vec![0.0; first.data().len()];
    for (i, v) in views.iter().enumerate() {
        if !v.same_dims(first) || v.channels() != first.channels() {
            return Err(Error::DimensionMismatch {
                entry: format!("views[{i}]"),
                expected_height: first.height(),
                expected_width: first.width(),
                height: v.height(),
                width: v.width(),
            });
        }
        for (a, s) in acc.iter_mut().zip(v.data()) {
            *a += s;
        }
    }
    let n = views.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    ImageTensor::new(first.height(), first.width(), first.channels(), acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, c, |_, _, _| rng.gen::<f64>())
    }

    #[test]
    fn identical_views_are_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 6, 7, 3);
        let out = integrate(&vec![img.clone(); 5]).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn two_view_mean() {
        let a = ImageTensor::new(1, 1, 1, vec![1.0]).unwrap();
        let b = ImageTensor::new(1, 1, 1, vec![0.2]).unwrap();
        assert!((integrate(&[a, b]).unwrap().data()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(integrate(&[]).is_err());
        let a = ImageTensor::zeros(2, 2, 3);
        let b = ImageTensor::zeros(2, 3, 3);
        assert!(matches!(integrate(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }

    fn channel_variances(img: &ImageTensor) -> Vec<f64> {
        let n = img.pixel_count() as f64;
        (0..img.channels())
            .map(|c| {
                let vals: Vec<f64> = img.pixels().map(|p| p[c]).collect();
                let mean = vals.iter().sum::<f64>() / n;
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
            })
            .collect()
    }

    #[test]
    fn integration_reduces_variance_permutation_invariant_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let views: Vec<_> = (0..rng.gen_range(2..8))
                .map(|_| random_image(&mut rng, 9, 9, 3))
                .collect();
            let out = integrate(&views).unwrap();
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));

            let per_view: Vec<Vec<f64>> = views.iter().map(channel_variances).collect();
            for (c, v) in channel_variances(&out).iter().enumerate() {
                let mean = per_view.iter().map(|pv| pv[c]).sum::<f64>() / views.len() as f64;
                assert!(*v <= mean + 1e-12);
            }

            let mut rev = views.clone();
            rev.reverse();
            let out_rev = integrate(&rev).unwrap();
            for (a, b) in out.data().iter().zip(out_rev.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
