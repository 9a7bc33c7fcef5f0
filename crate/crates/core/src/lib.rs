//! Food-image classification toolkit: a small CPU tensor/CNN library with
//! hand-written backpropagation, affine data expansion, a bag-of-features
//! baseline, dataset packing and evaluation metrics.

pub mod augment;
mod binio;
pub mod bof;
pub mod dataset;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use binio::sniff_magic;
pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Real, Tensor};
