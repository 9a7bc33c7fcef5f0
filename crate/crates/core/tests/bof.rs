use foodnet::bof::{
    dense_descriptors, encode_histogram, grayscale, kmeans, kmeans_fit, kmeans_objective, svm_predict, svm_train,
    BofConfig, BofModel, Codebook, Descriptor,
};
use foodnet::dataset::make_synthetic;
use foodnet::{Rng, Tensor};
use proptest::prelude::*;

fn cloud(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f32>> {
    (0..n).map(|_| (0..dim).map(|_| rng.uniform_range(-5.0, 5.0) as f32).collect()).collect()
}

#[test]
fn kmeans_objective_never_increases() {
    let mut rng = Rng::new(1234);
    for case in 0..100 {
        let n = 5 + rng.below(40);
        let dim = 1 + rng.below(4);
        let k = 1 + rng.below(5.min(n));
        let pts = cloud(n, dim, &mut rng);
        let fit = kmeans_fit(&pts, k, 30, case).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "case {case}: {:?}", fit.objective_trace);
        }
    }
}

/// A converged solution is a Lloyd fixed point: every centroid is the mean
/// of the points nearest to it.
#[test]
fn converged_centroids_are_cluster_means() {
    let mut rng = Rng::new(8);
    for case in 0..20 {
        let pts = cloud(30, 2, &mut rng);
        let fit = kmeans_fit(&pts, 3, 100, case).unwrap();
        assert!(fit.converged);
        let cb = &fit.codebook;
        for (j, c) in cb.centroids.iter().enumerate() {
            let members: Vec<&Vec<f32>> = pts.iter().filter(|p| cb.nearest(p) == j).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..2 {
                let mean = members.iter().map(|p| p[d] as f64).sum::<f64>() / members.len() as f64;
                assert!((c[d] as f64 - mean).abs() < 1e-4, "case {case}");
            }
        }
    }
}

/// Brute force over every 2-partition of a tiny set: k-means with k=2 on two
/// well-separated groups must find the optimal objective.
#[test]
fn separated_groups_reach_brute_force_optimum() {
    let pts: Vec<Vec<f32>> = [0.0, 0.5, 1.0, 10.0, 10.4, 11.0].iter().map(|&v| vec![v]).collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << pts.len()) - 1 {
        let mut cost = 0.0;
        for side in [true, false] {
            let group: Vec<f64> = (0..pts.len())
                .filter(|i| (mask >> i & 1 == 1) == side)
                .map(|i| pts[i][0] as f64)
                .collect();
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            cost += group.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
        best = best.min(cost);
    }
    for seed in 0..10 {
        let cb = kmeans(&pts, 2, 50, seed).unwrap();
        assert!((kmeans_objective(&pts, &cb) - best).abs() < 1e-5, "seed {seed}");
    }
}

#[test]
fn svm_fits_separable_toy_set() {
    // three classes on a circle, each well inside its own sector
    let mut rng = Rng::new(3);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..90 {
        let c = i % 3;
        let angle = c as f64 * std::f64::consts::TAU / 3.0 + rng.uniform_range(-0.3, 0.3);
        let r = rng.uniform_range(1.0, 2.0);
        xs.push(vec![(r * angle.cos()) as f32, (r * angle.sin()) as f32]);
        ys.push(c);
    }
    let m = svm_train(&xs, &ys, 3, 1e-3, 100, 0).unwrap();
    let correct = xs.iter().zip(&ys).filter(|(x, &y)| svm_predict(&m, x).unwrap() == y).count();
    assert_eq!(correct, xs.len());
}

proptest! {
    #[test]
    fn histogram_is_a_distribution(n in 1usize..40, k in 2usize..6, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let centroids = cloud(k, 3, &mut rng);
        let cb = Codebook { centroids };
        let descs: Vec<Descriptor> = cloud(n, 3, &mut rng)
            .into_iter()
            .map(|values| Descriptor { values, y: 0, x: 0 })
            .collect();
        let h = encode_histogram(&descs, &cb).unwrap();
        prop_assert_eq!(h.len(), k);
        prop_assert!(h.iter().all(|&v| v >= 0.0));
        prop_assert!((h.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn descriptors_are_unit_or_zero(seed in any::<u64>(), size in 16usize..40) {
        let mut rng = Rng::new(seed);
        let img = Tensor::from_fn(&[size, size, 3], |_| rng.uniform() as f32);
        let d = dense_descriptors(&grayscale(&img).unwrap(), 8, 16).unwrap();
        let per_side = (size - 16) / 8 + 1;
        prop_assert_eq!(d.len(), per_side * per_side);
        for desc in d {
            let norm = desc.values.iter().map(|v| v * v).sum::<f32>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-4);
            prop_assert!(desc.values.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn pipeline_beats_chance_on_synthetic_data() {
    let data = make_synthetic(4, 12, 5, 48).unwrap();
    let (train, test) = data.split(0.5, 1).unwrap();
    let config = BofConfig {
        k: 24,
        svm_epochs: 60,
        lambda: 1e-3,
        ..BofConfig::default()
    };
    let model = BofModel::train(&train.to_image_set(), &config).unwrap();
    let set = test.to_image_set();
    let pred = model.predict(&set.image_refs()).unwrap();
    let acc = pred.iter().zip(&set.labels).filter(|(p, l)| p == l).count() as f64 / pred.len() as f64;
    assert!(acc > 0.25, "{acc}");
    let again = BofModel::train(&train.to_image_set(), &config).unwrap();
    assert_eq!(model, again);
}

#[test]
fn vocabulary_larger_than_descriptor_pool_is_an_error() {
    let data = make_synthetic(2, 2, 0, 16).unwrap();
    let config = BofConfig {
        k: 10,
        ..BofConfig::default()
    };
    assert!(matches!(
        BofModel::train(&data.to_image_set(), &config),
        Err(foodnet::Error::TooFewPoints { .. })
    ));
}
