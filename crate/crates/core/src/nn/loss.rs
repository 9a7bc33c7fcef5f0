use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Max-shifted softmax; stable for arbitrarily large finite logits.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn cross_entropy_single<T: Real>(probs: &[T], label: usize) -> f64 {
    -probs[label].as_f64().max(PROB_FLOOR).ln()
}

/// Mean negative log-likelihood of the true labels over a `(B, K)` batch.
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    if probs.rank() != 2 || probs.shape()[0] != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            expected: vec![labels.len(), probs.shape().last().copied().unwrap_or(0)],
            got: probs.shape().to_vec(),
        });
    }
    let k = probs.shape()[1];
    if labels.is_empty() {
        return Err(Error::Empty("label batch"));
    }
    let mut total = 0.0;
    for (row, &label) in probs.data().chunks_exact(k).zip(labels) {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        total += cross_entropy_single(row, label);
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_examples() {
        assert!(softmax(&[0.3f64; 10]).iter().all(|&p| (p - 0.1).abs() < 1e-15));
        let p = softmax(&[0.0f64, 2f64.ln()]);
        assert_abs_diff_eq!(p[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 2.0 / 3.0, epsilon = 1e-15);
        let p = softmax(&[1000.0f32, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = Tensor::<f64>::full(&[1, 10], 0.1);
        assert_abs_diff_eq!(cross_entropy(&uniform, &[3]).unwrap(), 10f64.ln(), epsilon = 1e-12);

        let sure = Tensor::<f64>::from_vec(&[1, 2], vec![0.0, 1.0]).unwrap();
        assert_eq!(cross_entropy(&sure, &[1]).unwrap(), 0.0);

        let two = Tensor::<f64>::from_vec(&[2, 2], vec![0.5, 0.5, 0.75, 0.25]).unwrap();
        let ce = cross_entropy(&two, &[0, 1]).unwrap();
        assert_abs_diff_eq!(ce, -(0.5f64.ln() + 0.25f64.ln()) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ce, 1.039721, epsilon = 1e-6);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let wrong = Tensor::<f64>::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        let ce = cross_entropy(&wrong, &[1]).unwrap();
        assert_abs_diff_eq!(ce, -(1e-12f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let probs = Tensor::<f32>::full(&[1, 10], 0.1);
        assert!(matches!(
            cross_entropy(&probs, &[10]),
            Err(Error::LabelOutOfRange { label: 10, classes: 10 })
        ));
    }
}
