use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stage of the layer chain. Parameterized kinds (`Conv`, `Dense`) own a
/// weight/bias pair in [`super::NetworkModel::params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid, stride-1 convolution with `filters` output channels.
    Conv { kernel: usize, filters: usize },
    /// 2×2 max pooling, stride 2.
    MaxPool,
    Relu,
    /// Inverted dropout; `rate` is the drop probability.
    Dropout { rate: f32 },
    Flatten,
    Dense { units: usize },
    /// Must terminate the chain; trained jointly with cross-entropy.
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Conv { kernel, filters } if kernel == 0 || filters == 0 => Err(
                Error::invalid(format!("conv layer needs kernel ≥ 1 and filters ≥ 1, got {kernel}/{filters}")),
            ),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")))
            }
            LayerSpec::Dense { units: 0 } => Err(Error::invalid("dense layer needs ≥ 1 unit")),
            _ => Ok(()),
        }
    }

    /// Output activation shape given the input activation shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| {
            Err(Error::invalid(format!(
                "{self:?} cannot follow activation of shape {input:?}: {what}"
            )))
        };
        match *self {
            LayerSpec::Conv { kernel, filters } => match *input {
                [h, w, _] if h >= kernel && w >= kernel => {
                    Ok(vec![h - kernel + 1, w - kernel + 1, filters])
                }
                [_, _, _] => bad("feature map smaller than kernel"),
                _ => bad("expects a feature map"),
            },
            LayerSpec::MaxPool => match *input {
                [h, w, c] if h >= 2 && w >= 2 => Ok(vec![h / 2, w / 2, c]),
                [_, _, _] => bad("feature map smaller than 2×2"),
                _ => bad("expects a feature map"),
            },
            LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::Softmax => {
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units } => match *input {
                [_] => Ok(vec![units]),
                _ => bad("expects a flat vector (insert a flatten layer)"),
            },
        }
    }
}

/// The five-layer food-recognition network: three conv(+ReLU)+pool stages
/// with 7/5/3 kernels and 32/64/128 maps, dropout 0.25 after the third
/// pooling stage, a 128-unit ReLU layer with dropout 0.5, and a softmax
/// output over `classes`.
pub fn five_layer_specs(classes: usize) -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv { kernel: 7, filters: 32 },
        Relu,
        MaxPool,
        Conv { kernel: 5, filters: 64 },
        Relu,
        MaxPool,
        Conv { kernel: 3, filters: 128 },
        Relu,
        MaxPool,
        Dropout { rate: 0.25 },
        Flatten,
        Dense { units: 128 },
        Relu,
        Dropout { rate: 0.5 },
        Dense { units: classes },
        Softmax,
    ]
}
