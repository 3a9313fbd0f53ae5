mod common;

use msad::detectors::{rx_global, rx_local, rx_modified};
use msad::{detect, DetectorConfig, ImageTensor, Method};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_windows() -> DetectorConfig {
    DetectorConfig {
        guard_win: 3,
        bg_win: 5,
        ..Default::default()
    }
}

#[test]
fn rx_family_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..12 {
        let (h, w, n) = (rng.gen_range(6..14), rng.gen_range(6..14), rng.gen_range(3..5));
        let img = common::random_image(&mut rng, h, w, n);
        let cfg = small_windows();
        let g = rx_global(&img, &cfg).unwrap();
        let m = rx_modified(&img, &cfg).unwrap();
        let l = rx_local(&img, &cfg).unwrap();
        assert!(common::max_rel_err(g.scores(), &common::rx_global(&img, 1e-6), 1e-12) < 1e-6);
        assert!(common::max_rel_err(m.scores(), &common::rx_modified(&img, 1e-6), 1e-12) < 1e-6);
        assert!(common::max_rel_err(l.scores(), &common::rx_local(&img, 3, 5, 1e-6), 1e-12) < 1e-6);
    }
}

#[test]
fn rx_local_bright_pixel_16x16() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut img = ImageTensor::from_fn(16, 16, 3, |_, _, _| 0.4 + 0.05 * rng.gen::<f64>());
    img.pixel_mut(9, 6).copy_from_slice(&[1.0, 1.0, 1.0]);
    let s = rx_local(&img, &small_windows()).unwrap();
    assert_eq!(s.argmax(), 9 * 16 + 6);
    assert!(common::max_rel_err(s.scores(), &common::rx_local(&img, 3, 5, 1e-6), 1e-12) < 1e-6);
}

#[test]
fn rx_local_corner_uses_clipped_annulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = common::random_image(&mut rng, 10, 10, 3);
    // At (0, 0) the 7×7 window keeps rows/cols 0..=3 and the 3×3 guard keeps
    // 0..=1, leaving 16 - 4 = 12 background pixels.
    let ring = common::annulus(&img, 0, 0, 3, 7);
    assert_eq!(ring.len(), 12);
    let expected = {
        let (mean, cov) = common::mean_cov(&ring);
        common::mahalanobis(img.pixel(0, 0), &mean, &cov, 1e-6)
    };
    let cfg = DetectorConfig {
        guard_win: 3,
        bg_win: 7,
        ..Default::default()
    };
    let got = rx_local(&img, &cfg).unwrap().get(0, 0);
    assert!((got - expected).abs() <= 1e-6 * expected);
}

#[test]
fn rx_global_is_affine_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = DetectorConfig {
        ridge: 0.0,
        ..Default::default()
    };
    for _ in 0..10 {
        let n = rng.gen_range(3..5);
        let img = common::random_image(&mut rng, 9, 11, n);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (i == j) as u8 as f64 + 0.4 * (rng.gen::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mixed = ImageTensor::from_fn(9, 11, n, |y, x, i| {
            b[i] + (0..n).map(|j| a[i][j] * img.get(y, x, j)).sum::<f64>()
        });
        let before = rx_global(&img, &cfg).unwrap();
        let after = rx_global(&mixed, &cfg).unwrap();
        assert!(common::max_rel_err(after.scores(), before.scores(), 1e-12) < 1e-6);
    }
}

#[test]
fn wide_local_window_agrees_with_global_on_single_outlier() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..5 {
        let mut img = ImageTensor::from_fn(12, 12, 3, |_, _, _| 0.3 + 0.1 * rng.gen::<f64>());
        let (y, x) = (rng.gen_range(0..12), rng.gen_range(0..12));
        img.pixel_mut(y, x).copy_from_slice(&[0.9, 0.1, 0.8]);
        let cfg = DetectorConfig {
            guard_win: 1,
            bg_win: 25,
            ..Default::default()
        };
        let g = rx_global(&img, &cfg).unwrap();
        let l = rx_local(&img, &cfg).unwrap();
        assert_eq!(l.argmax(), g.argmax(), "trial {trial}");
        assert_eq!(g.argmax(), y * 12 + x);
    }
}

#[test]
fn duplicating_the_anomaly_never_raises_its_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let base = ImageTensor::from_fn(10, 10, 3, |_, _, _| 0.5 + 0.1 * (rng.gen::<f64>() - 0.5));
    let anomaly = [0.95, 0.05, 0.6];
    let cfg = DetectorConfig::default();
    let mut last = f64::INFINITY;
    for copies in 1..=12 {
        let mut img = base.clone();
        for k in 0..copies {
            img.pixel_mut(k / 10, k % 10).copy_from_slice(&anomaly);
        }
        let score = rx_global(&img, &cfg).unwrap().get(0, 0);
        assert!(score <= last, "{copies} copies: {score} > {last}");
        last = score;
    }
}

#[test]
fn subsampled_fits_are_bit_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    // 300 × 300 exceeds the fitting subsample size.
    let img = common::random_image(&mut rng, 300, 300, 3);
    let cfg = DetectorConfig {
        seed: 77,
        ..Default::default()
    };
    for method in [Method::Gmm, Method::Cbad] {
        let a = detect(method, &img, &cfg).unwrap().scores;
        let b = detect(method, &img, &cfg).unwrap().scores;
        assert_eq!(a, b, "{method}");
    }
}

#[test]
fn dispatch_matches_direct_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let img = common::random_image(&mut rng, 12, 12, 4);
    let cfg = DetectorConfig {
        lof_neighbors: 10,
        ..small_windows()
    };
    assert_eq!(
        detect(Method::Rxg, &img, &cfg).unwrap().scores,
        rx_global(&img, &cfg).unwrap()
    );
    assert_eq!(
        detect(Method::Rxm, &img, &cfg).unwrap().scores,
        rx_modified(&img, &cfg).unwrap()
    );
    assert_eq!(
        detect(Method::Rxl, &img, &cfg).unwrap().scores,
        rx_local(&img, &cfg).unwrap()
    );
    assert!("rx-global".parse::<Method>().is_err());
    assert_eq!("lof".parse::<Method>().unwrap(), Method::Lof);
}

#[test]
fn recorded_runtime_covers_only_scoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let img = common::random_image(&mut rng, 256, 256, 4);
    let cfg = DetectorConfig::default();
    detect(Method::Rxl, &img, &cfg).unwrap();
    let a = detect(Method::Rxl, &img, &cfg).unwrap().elapsed.as_secs_f64();
    let b = detect(Method::Rxl, &img, &cfg).unwrap().elapsed.as_secs_f64();
    assert!(a.max(b) < 3.0 * a.min(b), "{a} vs {b}");
}

fn image_strategy() -> impl Strategy<Value = ImageTensor> {
    (3usize..9, 3usize..9, 3usize..5, 1u32..6, any::<u64>()).prop_map(|(h, w, n, levels, seed)| {
        // Few quantization levels produce repeated pixels and singular
        // windows alongside generic data.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageTensor::from_fn(h, w, n, |_, _, _| (rng.gen_range(0..=levels) as f64) / levels as f64)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_score_is_finite_and_non_negative(img in image_strategy(), seed in any::<u64>()) {
        let cfg = DetectorConfig { lof_neighbors: 5, seed, ..small_windows() };
        for method in Method::ALL {
            let s = detect(method, &img, &cfg).unwrap().scores;
            prop_assert!(s.scores().iter().all(|v| v.is_finite() && *v >= 0.0), "{}", method);
        }
    }
}
