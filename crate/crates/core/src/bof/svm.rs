use crate::error::{Error, Result};
use crate::rng::Rng;

/// One-vs-rest linear classifier: `score_c(x) = w_c · x + b_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<f32>,
}

impl SvmModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                op: "svm_predict",
                expected: vec![self.dim()],
                got: vec![x.len()],
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| w.iter().zip(x).map(|(&wi, &xi)| wi as f64 * xi as f64).sum::<f64>() + b as f64)
            .collect())
    }
}

/// Trains one binary problem per class with the Pegasos primal
/// subgradient method on `(λ/2)‖w‖² + mean hinge loss`. Step `t` (counted
/// across epochs) uses rate `1/(λ t)`; after each step the iterate is
/// projected onto the ball of radius `1/√λ`. The bias is learned as the
/// weight of a constant unit feature. Each epoch visits the samples in a
/// fresh seeded shuffle.
pub fn svm_train(
    features: &[Vec<f32>],
    labels: &[usize],
    classes: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmModel> {
    if features.len() != labels.len() {
        return Err(Error::invalid("svm_train: features and labels differ in length"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("svm lambda must be > 0, got {lambda}")));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let mut present = vec![false; classes];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClass);
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::ShapeMismatch {
            op: "svm_train",
            expected: vec![dim],
            got: vec![f.len()],
        });
    }

    let radius = 1.0 / lambda.sqrt();
    let mut rng = Rng::new(seed);
    let mut weights = Vec::with_capacity(classes);
    let mut biases = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut order_rng = rng.fork();
        // last slot is the bias weight on the constant feature
        let mut w = vec![0.0f64; dim + 1];
        let mut t = 0usize;
        let mut order: Vec<usize> = (0..features.len()).collect();
        for _ in 0..epochs {
            order_rng.shuffle(&mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = if labels[i] == c { 1.0 } else { -1.0 };
                let x = &features[i];
                let score = w[..dim].iter().zip(x).map(|(&wi, &xi)| wi * xi as f64).sum::<f64>() + w[dim];
                let shrink = 1.0 - eta * lambda;
                for wi in &mut w {
                    *wi *= shrink;
                }
                if y * score < 1.0 {
                    for (wi, &xi) in w[..dim].iter_mut().zip(x) {
                        *wi += eta * y * xi as f64;
                    }
                    w[dim] += eta * y;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let s = radius / norm;
                    for wi in &mut w {
                        *wi *= s;
                    }
                }
            }
        }
        biases.push(w[dim] as f32);
        w.truncate(dim);
        weights.push(w.into_iter().map(|v| v as f32).collect());
    }
    Ok(SvmModel { weights, biases })
}

/// Class with the highest score; ties go to the lowest index.
pub fn svm_predict(model: &SvmModel, x: &[f32]) -> Result<usize> {
    let scores = model.scores(x)?;
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f32>>, Vec<usize>) {
        let mut rng = Rng::new(8);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let cx = if c == 0 { -1.0 } else { 1.0 };
            xs.push(vec![
                (cx + rng.uniform_range(-0.6, 0.6)) as f32,
                rng.uniform_range(-1.0, 1.0) as f32,
            ]);
            ys.push(c);
        }
        (xs, ys)
    }

    #[test]
    fn separable_set_is_fit() {
        let (xs, ys) = separable();
        let m = svm_train(&xs, &ys, 2, 1e-3, 50, 1).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(svm_predict(&m, x).unwrap(), y);
        }
    }

    #[test]
    fn heavy_regularization_shrinks_weights() {
        let (xs, ys) = separable();
        let m = svm_train(&xs, &ys, 2, 1e6, 20, 1).unwrap();
        for w in &m.weights {
            let norm = w.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!(norm < 1e-2, "{norm}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (xs, ys) = separable();
        assert_eq!(
            svm_train(&xs, &ys, 2, 1e-3, 5, 4).unwrap(),
            svm_train(&xs, &ys, 2, 1e-3, 5, 4).unwrap()
        );
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![0.0f32], vec![1.0]];
        assert!(matches!(svm_train(&xs, &[1, 1], 3, 1e-3, 5, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn predict_rules() {
        let zero = SvmModel {
            weights: vec![vec![0.0; 3]; 4],
            biases: vec![0.0; 4],
        };
        assert_eq!(svm_predict(&zero, &[1.0, 2.0, 3.0]).unwrap(), 0);
        let m = SvmModel {
            weights: vec![vec![0.0]; 3],
            biases: vec![0.1, 0.9, 0.3],
        };
        assert_eq!(svm_predict(&m, &[5.0]).unwrap(), 1);
        assert!(svm_predict(&m, &[1.0, 2.0]).is_err());
    }
}
