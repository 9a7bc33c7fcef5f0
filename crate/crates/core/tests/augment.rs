use foodnet::augment::{affine_matrix, expand_batch, sample_affine, warp_bilinear, AffineParams, AugmentConfig};
use foodnet::{Rng, Tensor};
use proptest::prelude::*;

proptest! {
    #[test]
    fn samples_respect_bounds(seed in any::<u64>(), rot in 0.0f64..45.0, tr in 0.0f64..0.3) {
        let cfg = AugmentConfig { max_rotation_deg: rot, max_translate_frac: tr, ..AugmentConfig::default() };
        let (p, next) = sample_affine(&cfg, 40, 30, Rng::new(seed));
        prop_assert!(p.rotation_deg.abs() <= rot);
        prop_assert!(p.translate_x.abs() <= tr * 40.0 + 1e-9);
        prop_assert!(p.translate_y.abs() <= tr * 30.0 + 1e-9);
        prop_assert!((cfg.scale_min..=cfg.scale_max).contains(&p.scale));
        prop_assert_ne!(next, Rng::new(seed));
    }

    #[test]
    fn warp_stays_within_source_range(seed in any::<u64>(), fill in 0.0f32..1.0) {
        let mut rng = Rng::new(seed);
        let img = Tensor::from_fn(&[17, 13, 3], |_| rng.uniform_range(0.2, 0.8) as f32);
        let (p, _) = sample_affine(&AugmentConfig::default(), 13, 17, rng);
        let out = warp_bilinear(&img, &affine_matrix(&p, 13, 17).unwrap(), fill);
        prop_assert_eq!(out.shape(), img.shape());
        let lo = 0.2f32.min(fill) - 1e-6;
        let hi = 0.8f32.max(fill) + 1e-6;
        prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
    }
}

#[test]
fn zero_bounds_reproduce_the_input() {
    let mut rng = Rng::new(1);
    let images: Vec<Tensor> = (0..3).map(|_| Tensor::from_fn(&[9, 11, 3], |_| rng.uniform() as f32)).collect();
    let (out, labels, _) = expand_batch(&images, &[0, 1, 2], &AugmentConfig::identity(), Rng::new(2)).unwrap();
    assert_eq!(out, images);
    assert_eq!(labels, vec![0, 1, 2]);
    let m = affine_matrix(&AffineParams::IDENTITY, 11, 9).unwrap();
    assert_eq!(warp_bilinear(&images[0], &m, 0.0), images[0]);
}

#[test]
fn expansion_is_deterministic_per_seed() {
    let img = Tensor::from_fn(&[16, 16, 3], |i| (i % 7) as f32 / 7.0);
    let images = vec![img.clone(), img];
    let cfg = AugmentConfig::default();
    let a = expand_batch(&images, &[0, 0], &cfg, Rng::new(5)).unwrap();
    let b = expand_batch(&images, &[0, 0], &cfg, Rng::new(5)).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.2, b.2);
    assert_ne!(a.0[0], a.0[1]);
}
