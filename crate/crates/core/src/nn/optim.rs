use super::model::{Gradients, Params};
use crate::error::{Error, Result};
use crate::tensor::Real;

/// Cost-driven learning rate: `min(eta0 · exp(cost), eta_max)`, where `cost`
/// is the mean training loss of the previous epoch.
pub fn lr_schedule(eta0: f64, cost: f64, eta_max: f64) -> f64 {
    (eta0 * cost.exp()).min(eta_max)
}

/// Plain SGD update `p ← p − eta·g`, no momentum or weight decay.
pub fn sgd_step<T: Real>(params: &mut [Params<T>], grads: &Gradients<T>, eta: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::invalid(format!(
            "sgd_step: {} parameter sets but {} gradient sets",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        p.weight.check_same_shape("sgd_step", &g.weight)?;
        p.bias.check_same_shape("sgd_step", &g.bias)?;
    }
    let eta = T::of(eta);
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, &gv) in p.weight.data_mut().iter_mut().zip(g.weight.data()) {
            *pv -= eta * gv;
        }
        for (pv, &gv) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
            *pv -= eta * gv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> Params<f64> {
        Params {
            weight: Tensor::full(&[1, 1], v),
            bias: Tensor::zeros(&[1]),
        }
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_schedule(0.001, 0.0, 0.05), 0.001);
        assert_relative_eq!(lr_schedule(0.001, 10f64.ln(), 0.05), 0.01, max_relative = 1e-12);
        assert_eq!(lr_schedule(0.001, 5.0, 0.05), 0.05);
        assert_relative_eq!(0.001 * 5f64.exp(), 0.1484, epsilon = 1e-4);
    }

    #[test]
    fn step_examples() {
        let mut p = vec![scalar(1.0)];
        sgd_step(&mut p, &vec![scalar(2.0)], 0.0).unwrap();
        assert_eq!(p[0].weight.data(), &[1.0]);
        sgd_step(&mut p, &vec![scalar(2.0)], 0.1).unwrap();
        assert_relative_eq!(p[0].weight.data()[0], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn quadratic_recurrence() {
        // f(p) = p², g = 2p, so each step multiplies p by (1 − 2·0.1).
        let mut p = vec![scalar(1.0)];
        for k in 1..=20 {
            let g = vec![scalar(2.0 * p[0].weight.data()[0])];
            sgd_step(&mut p, &g, 0.1).unwrap();
            assert_relative_eq!(p[0].weight.data()[0], 0.8f64.powi(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![scalar(1.0)];
        let g = vec![Params {
            weight: Tensor::zeros(&[2, 1]),
            bias: Tensor::zeros(&[1]),
        }];
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
        assert_eq!(p[0].weight.data(), &[1.0]);
    }
}
