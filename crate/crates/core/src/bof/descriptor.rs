use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DESCRIPTOR_CELLS: usize = 4;
pub const ORIENTATION_BINS: usize = 8;
pub const DESCRIPTOR_DIM: usize = DESCRIPTOR_CELLS * DESCRIPTOR_CELLS * ORIENTATION_BINS;
const CLAMP: f32 = 0.2;
const FLAT_NORM: f64 = 1e-6;

/// A 128-dimensional gradient-orientation histogram of one square patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f32>,
    /// Top-left corner of the patch (row, column).
    pub y: usize,
    pub x: usize,
}

/// ITU-R 601 luma: `0.299 R + 0.587 G + 0.114 B`.
pub fn grayscale(image: &Tensor) -> Result<Tensor> {
    if image.rank() != 3 || image.shape()[2] != 3 {
        return Err(Error::ShapeMismatch {
            op: "grayscale",
            expected: vec![image.shape().first().copied().unwrap_or(0), image.shape().get(1).copied().unwrap_or(0), 3],
            got: image.shape().to_vec(),
        });
    }
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let data = image
        .data()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) as f32)
        .collect();
    Tensor::from_vec(&[h, w], data)
}

/// Dense single-scale SIFT-style descriptors.
///
/// Patches of `patch × patch` pixels are placed every `step` pixels from the
/// top-left corner; partial patches at the right/bottom edge are dropped.
/// Gradients are central differences (one-sided at the image border). Each
/// pixel votes its gradient magnitude into the 8 orientation bins of its
/// 4×4 spatial cell, shared linearly between the two nearest bin centers.
/// The 128-vector is L2-normalized, clamped at 0.2 and renormalized; a patch
/// whose raw norm is below 1e-6 yields the zero vector.
pub fn dense_descriptors(gray: &Tensor, step: usize, patch: usize) -> Result<Vec<Descriptor>> {
    if gray.rank() != 2 {
        return Err(Error::ShapeMismatch {
            op: "dense_descriptors",
            expected: vec![patch, patch],
            got: gray.shape().to_vec(),
        });
    }
    if step == 0 || patch == 0 || !patch.is_multiple_of(DESCRIPTOR_CELLS) {
        return Err(Error::invalid(format!(
            "descriptor step must be ≥ 1 and patch a positive multiple of 4, got step {step}, patch {patch}"
        )));
    }
    let (h, w) = (gray.shape()[0], gray.shape()[1]);
    if h < patch || w < patch {
        return Err(Error::ShapeMismatch {
            op: "dense_descriptors",
            expected: vec![patch, patch],
            got: gray.shape().to_vec(),
        });
    }

    let img = gray.data();
    let px = |y: usize, x: usize| img[y * w + x] as f64;
    let mut magnitude = vec![0.0f64; h * w];
    let mut bin_pos = vec![0.0f64; h * w];
    let bin_width = std::f64::consts::TAU / ORIENTATION_BINS as f64;
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let gx = (px(y, xr) - px(y, xl)) / (xr - xl).max(1) as f64;
            let gy = (px(yd, x) - px(yu, x)) / (yd - yu).max(1) as f64;
            magnitude[y * w + x] = gx.hypot(gy);
            bin_pos[y * w + x] = gy.atan2(gx).rem_euclid(std::f64::consts::TAU) / bin_width;
        }
    }

    let cell = patch / DESCRIPTOR_CELLS;
    let mut out = Vec::new();
    for py in (0..=h - patch).step_by(step) {
        for px0 in (0..=w - patch).step_by(step) {
            let mut hist = [0.0f64; DESCRIPTOR_DIM];
            for dy in 0..patch {
                for dx in 0..patch {
                    let i = (py + dy) * w + px0 + dx;
                    let m = magnitude[i];
                    if m == 0.0 {
                        continue;
                    }
                    let c = (dy / cell) * DESCRIPTOR_CELLS + dx / cell;
                    let b = bin_pos[i];
                    let b0 = b.floor();
                    let frac = b - b0;
                    let lo = b0 as usize % ORIENTATION_BINS;
                    let hi = (lo + 1) % ORIENTATION_BINS;
                    hist[c * ORIENTATION_BINS + lo] += m * (1.0 - frac);
                    hist[c * ORIENTATION_BINS + hi] += m * frac;
                }
            }
            out.push(Descriptor {
                values: normalize_clamp(&hist),
                y: py,
                x: px0,
            });
        }
    }
    Ok(out)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize_clamp(hist: &[f64]) -> Vec<f32> {
    let norm = l2(hist);
    if norm < FLAT_NORM {
        return vec![0.0; hist.len()];
    }
    let clamped: Vec<f64> = hist.iter().map(|v| (v / norm).min(CLAMP as f64)).collect();
    let norm2 = l2(&clamped);
    clamped.iter().map(|v| (v / norm2) as f32).collect()
}
