use serde::{Deserialize, Serialize};

use super::loss::cross_entropy_single;
use super::model::{argmax, NetworkModel};
use super::optim::{lr_schedule, sgd_step};
use crate::augment::{affine_matrix, sample_affine, warp_bilinear, AugmentConfig};
use crate::dataset::ImageSet;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Base learning rate of the cost-driven schedule.
    pub eta0: f64,
    /// Ceiling on the scheduled learning rate.
    pub eta_max: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a test-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Re-sample a random warp for every training image each epoch.
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 0.001,
            eta_max: 0.05,
            batch_size: 32,
            max_epochs: 100,
            patience: 25,
            seed: 0,
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid(format!("eta0 must be > 0, got {}", self.eta0)));
        }
        if !(self.eta_max >= self.eta0) {
            return Err(Error::invalid(format!(
                "eta_max ({}) must be ≥ eta0 ({})",
                self.eta_max, self.eta0
            )));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size, patience and max_epochs must all be ≥ 1"));
        }
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training cross-entropy over the epoch (train mode, as the
    /// minibatches were seen). This is the cost that drives the next
    /// epoch's learning rate.
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainCurves {
    pub epochs: Vec<EpochRecord>,
}

impl TrainCurves {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn best_test_acc(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.test_acc).reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best test accuracy.
    pub model: NetworkModel,
    pub curves: TrainCurves,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Eval-mode mean loss and accuracy.
pub fn evaluate(model: &NetworkModel, set: &ImageSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let probs = model.predict_probs(&set.image_refs())?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, &label) in probs.iter().zip(&set.labels) {
        if label >= p.len() {
            return Err(Error::LabelOutOfRange { label, classes: p.len() });
        }
        loss += cross_entropy_single(p, label);
        correct += (argmax(p) == label) as usize;
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_set(model: &NetworkModel, set: &ImageSet, what: &'static str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty(what));
    }
    let k = model.num_classes();
    if let Some(&label) = set.labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    if let Some(img) = set.images.iter().find(|i| i.shape() != model.input_shape()) {
        return Err(Error::ShapeMismatch {
            op: "train",
            expected: model.input_shape().to_vec(),
            got: img.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn train(model: NetworkModel, train_set: &ImageSet, test_set: &ImageSet, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(model, train_set, test_set, config, |_| {})
}

/// Minibatch SGD with the cost-driven learning rate and early stopping on
/// test accuracy. `on_epoch` sees every record as soon as it is complete.
pub fn train_with_progress(
    mut model: NetworkModel,
    train_set: &ImageSet,
    test_set: &ImageSet,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_set(&model, train_set, "training set")?;
    check_set(&model, test_set, "test set")?;

    let mut rng = Rng::new(config.seed);
    let mut curves = TrainCurves::default();
    let mut cost = (model.num_classes() as f64).ln();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_params = model.params().to_vec();
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut stopped_early = false;
    let [h, w, _] = model.input_shape();

    for epoch in 1..=config.max_epochs {
        let eta = lr_schedule(config.eta0, cost, config.eta_max);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let warped: Vec<Tensor>;
            let images: Vec<&Tensor> = match &config.augment {
                Some(aug) => {
                    let mut ms = Vec::with_capacity(batch.len());
                    for _ in batch {
                        let (p, next) = sample_affine(aug, w, h, rng);
                        rng = next;
                        ms.push(affine_matrix(&p, w, h)?);
                    }
                    warped = batch
                        .iter()
                        .zip(&ms)
                        .map(|(&i, m)| warp_bilinear(&train_set.images[i], m, aug.fill_value))
                        .collect();
                    warped.iter().collect()
                }
                None => batch.iter().map(|&i| &train_set.images[i]).collect(),
            };
            let (grads, loss, ok) = model.batch_gradients(&images, &labels, &mut rng)?;
            sgd_step(model.params_mut(), &grads, eta)?;
            loss_sum += loss;
            correct += ok;
        }

        let n = train_set.len() as f64;
        let (test_loss, test_acc) = evaluate(&model, test_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            test_loss,
            test_acc,
            eta,
        };
        log::info!(
            "epoch {epoch}: eta {eta:.5} train loss {:.4} acc {:.4} | test loss {test_loss:.4} acc {test_acc:.4}",
            record.train_loss,
            record.train_acc
        );
        on_epoch(&record);
        curves.epochs.push(record);
        cost = record.train_loss;

        if test_acc > best_acc {
            best_acc = test_acc;
            best_params = model.params().to_vec();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }

    let best = NetworkModel::from_parts(
        model.input_shape(),
        model.layers().to_vec(),
        best_params,
        model.class_names().to_vec(),
    )?;
    Ok(TrainOutcome {
        model: best,
        curves,
        best_epoch,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerSpec;

    fn toy() -> (NetworkModel, ImageSet) {
        use LayerSpec::*;
        let model = NetworkModel::new(
            [6, 6, 1],
            vec![Conv { kernel: 3, filters: 2 }, Relu, Flatten, Dense { units: 2 }, Softmax],
            vec!["dark".into(), "bright".into()],
            1,
        )
        .unwrap();
        let mut rng = Rng::new(2);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..8 {
            let base = if i % 2 == 0 { 0.1 } else { 0.8 };
            images.push(Tensor::from_fn(&[6, 6, 1], |_| base + 0.1 * rng.uniform() as f32));
            labels.push(i % 2);
        }
        let set = ImageSet {
            classes: vec!["dark".into(), "bright".into()],
            images,
            labels,
        };
        (model, set)
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            eta_max: 0.0001,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_sets_rejected() {
        let (model, set) = toy();
        let empty = set.subset(&[]);
        assert!(matches!(
            train(model.clone(), &empty, &set, &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
        assert!(train(model, &set, &empty, &TrainConfig::default()).is_err());
    }

    #[test]
    fn first_epoch_uses_log_class_count() {
        let (model, set) = toy();
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(model, &set, &set, &cfg).unwrap();
        let e = &out.curves.epochs;
        assert_eq!(e[0].eta, lr_schedule(0.001, 2f64.ln(), 0.05));
        for w in e.windows(2) {
            assert_eq!(w[1].eta, lr_schedule(0.001, w[0].train_loss, 0.05));
        }
    }

    #[test]
    fn patience_one_stops_after_stall() {
        let (model, set) = toy();
        // zero learning rate: accuracy can never improve after epoch 1
        let cfg = TrainConfig {
            eta0: 1e-300,
            eta_max: 1e-300,
            patience: 1,
            max_epochs: 10,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(model, &set, &set, &cfg).unwrap();
        assert_eq!(out.curves.len(), 2);
        assert!(out.stopped_early);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn deterministic_with_and_without_augmentation() {
        let (model, set) = toy();
        for augment in [None, Some(AugmentConfig::default())] {
            let cfg = TrainConfig {
                max_epochs: 3,
                batch_size: 3,
                seed: 11,
                augment,
                ..TrainConfig::default()
            };
            let a = train(model.clone(), &set, &set, &cfg).unwrap();
            let b = train(model.clone(), &set, &set, &cfg).unwrap();
            assert_eq!(a.curves, b.curves);
            assert_eq!(a.model, b.model);
        }
    }
}
