//! Finite-difference validation of the backward pass.
//!
//! The network is cast to `f64`, the dropout masks are frozen by reusing the
//! per-sample seeds, and every parameter is perturbed by `±step`.

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::loss::cross_entropy_single;
use super::model::NetworkModel;
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-4;
/// Pass threshold on the max relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Architecture under test: input shape, layer chain and class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
    pub batch: usize,
}

impl CheckSpec {
    /// Reduced copy of the five-layer chain (12×12 input) covering every layer
    /// kind: conv, ReLU, max-pool (including an odd extent), dropout,
    /// flatten, dense and softmax.
    pub fn full_coverage() -> Self {
        use LayerSpec::*;
        Self {
            input_shape: [12, 12, 3],
            layers: vec![
                Conv { kernel: 3, filters: 4 },
                Relu,
                MaxPool,
                Conv { kernel: 3, filters: 6 },
                Relu,
                MaxPool,
                Dropout { rate: 0.25 },
                Flatten,
                Dense { units: 8 },
                Relu,
                Dropout { rate: 0.5 },
                Dense { units: 3 },
                Softmax,
            ],
            classes: 3,
            batch: 2,
        }
    }

    /// Softmax regression on raw pixels.
    pub fn linear() -> Self {
        use LayerSpec::*;
        Self {
            input_shape: [4, 4, 2],
            layers: vec![Flatten, Dense { units: 3 }, Softmax],
            classes: 3,
            batch: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter set, is_bias, flat element) of the worst entry.
    pub worst: (usize, bool, usize),
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn mean_loss(model: &NetworkModel<f64>, images: &[Tensor<f64>], labels: &[usize], seeds: &[u64]) -> Result<f64> {
    let mut total = 0.0;
    for ((x, &label), &seed) in images.iter().zip(labels).zip(seeds) {
        let mut rng = Rng::new(seed);
        let (probs, _) = model.forward_sample(x, Some(&mut rng), false)?;
        total += cross_entropy_single(&probs, label);
    }
    Ok(total / images.len() as f64)
}

fn slot(model: &mut NetworkModel<f64>, set: usize, is_bias: bool, element: usize) -> &mut f64 {
    let p = &mut model.params_mut()[set];
    let t = if is_bias { &mut p.bias } else { &mut p.weight };
    &mut t.data_mut()[element]
}

/// Compares analytic gradients of `model` on the given batch against central
/// differences. `corrupt` flips the sign of the analytic gradient, which
/// must drive the error to 2 (a self-test of the checker).
pub fn check_model(
    model: &NetworkModel<f64>,
    images: &[Tensor<f64>],
    labels: &[usize],
    dropout_seed: u64,
    corrupt: bool,
) -> Result<GradCheckReport> {
    let refs: Vec<&Tensor<f64>> = images.iter().collect();
    let mut rng = Rng::new(dropout_seed);
    let (grads, _, _) = model.batch_gradients(&refs, labels, &mut rng)?;
    let mut seed_rng = Rng::new(dropout_seed);
    let seeds: Vec<u64> = images.iter().map(|_| seed_rng.next_u64()).collect();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, false, 0),
        checked: 0,
    };
    for pi in 0..model.params().len() {
        for is_bias in [false, true] {
            let n = if is_bias {
                model.params()[pi].bias.len()
            } else {
                model.params()[pi].weight.len()
            };
            for e in 0..n {
                let original = *slot(&mut probe, pi, is_bias, e);
                *slot(&mut probe, pi, is_bias, e) = original + FD_STEP;
                let plus = mean_loss(&probe, images, labels, &seeds)?;
                *slot(&mut probe, pi, is_bias, e) = original - FD_STEP;
                let minus = mean_loss(&probe, images, labels, &seeds)?;
                *slot(&mut probe, pi, is_bias, e) = original;
                let numeric = (plus - minus) / (2.0 * FD_STEP);

                let g = &grads[pi];
                let mut analytic = if is_bias { g.bias.data()[e] } else { g.weight.data()[e] };
                if corrupt {
                    analytic = -analytic;
                }
                let err = relative_error(analytic, numeric);
                report.checked += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = (pi, is_bias, e);
                }
            }
        }
    }
    Ok(report)
}

/// Builds a seeded `f64` network from `spec`, a random batch in [0, 1] and
/// random labels, then runs [`check_model`].
pub fn gradient_check(spec: &CheckSpec, seed: u64, corrupt: bool) -> Result<GradCheckReport> {
    let names = (0..spec.classes).map(|i| format!("c{i}")).collect();
    let model = NetworkModel::<f64>::new(spec.input_shape, spec.layers.clone(), names, seed)?;
    let mut rng = Rng::new(seed ^ 0xA5A5_A5A5_5A5A_5A5A);
    let images: Vec<Tensor<f64>> = (0..spec.batch)
        .map(|_| Tensor::from_fn(&spec.input_shape, |_| rng.uniform()))
        .collect();
    let labels: Vec<usize> = (0..spec.batch).map(|_| rng.below(spec.classes)).collect();
    check_model(&model, &images, &labels, rng.next_u64(), corrupt)
}
