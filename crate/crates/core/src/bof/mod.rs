//! Bag-of-features baseline: dense grayscale descriptors, a k-means visual
//! vocabulary, L1-normalized word histograms and a one-vs-rest linear SVM.

mod descriptor;
mod kmeans;
mod svm;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use descriptor::{dense_descriptors, grayscale, Descriptor, DESCRIPTOR_DIM, ORIENTATION_BINS};
pub use kmeans::{kmeans, kmeans_fit, kmeans_objective, Codebook, KmeansFit};
pub use svm::{svm_predict, svm_train, SvmModel};

use crate::binio::{read_file, Reader, Writer};
use crate::dataset::ImageSet;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const BOF_MAGIC: &[u8; 6] = b"BOFM1\0";
pub const DENSE_STEP: usize = 8;
pub const DENSE_PATCH: usize = 16;

/// Counts nearest-word assignments and L1-normalizes them. No descriptors
/// gives the zero vector.
pub fn encode_histogram(descriptors: &[Descriptor], codebook: &Codebook) -> Result<Vec<f32>> {
    let k = codebook.k();
    if k == 0 {
        return Err(Error::Empty("codebook"));
    }
    let mut counts = vec![0usize; k];
    for d in descriptors {
        if d.values.len() != codebook.dim() {
            return Err(Error::ShapeMismatch {
                op: "encode_histogram",
                expected: vec![codebook.dim()],
                got: vec![d.values.len()],
            });
        }
        counts[codebook.nearest(&d.values)] += 1;
    }
    if descriptors.is_empty() {
        return Ok(vec![0.0; k]);
    }
    let n = descriptors.len() as f64;
    Ok(counts.into_iter().map(|c| (c as f64 / n) as f32).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BofConfig {
    /// Vocabulary size.
    pub k: usize,
    pub lambda: f64,
    pub svm_epochs: usize,
    pub kmeans_iters: usize,
    /// Descriptors sampled (without replacement) to fit the vocabulary.
    pub max_descriptors: usize,
    pub seed: u64,
}

impl Default for BofConfig {
    fn default() -> Self {
        Self {
            k: 256,
            lambda: 1e-4,
            svm_epochs: 100,
            kmeans_iters: 50,
            max_descriptors: 50_000,
            seed: 0,
        }
    }
}

impl BofConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("vocabulary size must be ≥ 2, got {}", self.k)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.max_descriptors < self.k {
            return Err(Error::invalid("max_descriptors must be ≥ k"));
        }
        Ok(())
    }
}

/// Trained vocabulary plus classifier.
///
/// File layout: magic `BOFM1\0`, u32 k, u32 descriptor dim, k·dim centroid
/// reals, u8 class count, then per class k weight reals and one bias real.
/// Reals are little-endian f32.
#[derive(Debug, Clone, PartialEq)]
pub struct BofModel {
    pub codebook: Codebook,
    pub svm: SvmModel,
}

fn image_descriptors(image: &Tensor) -> Result<Vec<Descriptor>> {
    dense_descriptors(&grayscale(image)?, DENSE_STEP, DENSE_PATCH)
}

impl BofModel {
    pub fn train(set: &ImageSet, config: &BofConfig) -> Result<Self> {
        config.validate()?;
        if set.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let per_image: Vec<Vec<Descriptor>> = set.images.par_iter().map(image_descriptors).collect::<Result<_>>()?;
        let mut pool: Vec<&Vec<f32>> = per_image.iter().flatten().map(|d| &d.values).collect();
        let mut rng = Rng::new(config.seed);
        if pool.len() > config.max_descriptors {
            rng.shuffle(&mut pool);
            pool.truncate(config.max_descriptors);
        }
        let points: Vec<Vec<f32>> = pool.into_iter().cloned().collect();
        let codebook = kmeans(&points, config.k, config.kmeans_iters, rng.next_u64())?;
        let hists: Vec<Vec<f32>> = per_image
            .par_iter()
            .map(|d| encode_histogram(d, &codebook))
            .collect::<Result<_>>()?;
        let svm = svm_train(&hists, &set.labels, set.num_classes(), config.lambda, config.svm_epochs, rng.next_u64())?;
        Ok(Self { codebook, svm })
    }

    pub fn histogram(&self, image: &Tensor) -> Result<Vec<f32>> {
        encode_histogram(&image_descriptors(image)?, &self.codebook)
    }

    pub fn predict(&self, images: &[&Tensor]) -> Result<Vec<usize>> {
        images
            .par_iter()
            .map(|img| svm_predict(&self.svm, &self.histogram(img)?))
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let k = self.codebook.k();
        if self.svm.dim() != k {
            return Err(Error::InconsistentHeader(format!(
                "svm dimension {} does not match vocabulary size {k}",
                self.svm.dim()
            )));
        }
        let classes = u8::try_from(self.svm.classes())
            .map_err(|_| Error::invalid("BoF model supports at most 255 classes"))?;
        let mut w = Writer::new(BOF_MAGIC);
        w.u32(k as u32);
        w.u32(self.codebook.dim() as u32);
        for c in &self.codebook.centroids {
            w.f32s(c);
        }
        w.u8(classes);
        for (wc, &b) in self.svm.weights.iter().zip(&self.svm.biases) {
            w.f32s(wc);
            w.f32s(&[b]);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, BOF_MAGIC, "BOFM1")?;
        let k = r.u32("vocabulary size")? as usize;
        let dim = r.u32("descriptor dim")? as usize;
        if k == 0 || dim == 0 {
            return Err(Error::InconsistentHeader("zero vocabulary size or descriptor dim".into()));
        }
        let centroids = (0..k)
            .map(|_| r.f32s(dim, "centroids"))
            .collect::<Result<Vec<_>>>()?;
        let classes = r.u8("class count")? as usize;
        let mut weights = Vec::with_capacity(classes);
        let mut biases = Vec::with_capacity(classes);
        for _ in 0..classes {
            weights.push(r.f32s(k, "svm weights")?);
            biases.push(r.f32s(1, "svm bias")?[0]);
        }
        r.finish()?;
        Ok(Self {
            codebook: Codebook { centroids },
            svm: SvmModel { weights, biases },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
