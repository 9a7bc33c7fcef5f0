//! Bounded random affine expansion: rotation, translation and scaling about
//! the image center, resampled bilinearly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub max_rotation_deg: f64,
    /// Fraction of width (x) or height (y).
    pub max_translate_frac: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub fill_value: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            max_rotation_deg: 20.0,
            max_translate_frac: 0.1,
            scale_min: 0.9,
            scale_max: 1.1,
            fill_value: 0.0,
        }
    }
}

impl AugmentConfig {
    /// A config that always samples the identity warp.
    pub fn identity() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_translate_frac: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            fill_value: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.max_rotation_deg,
            self.max_translate_frac,
            self.scale_min,
            self.scale_max,
            self.fill_value as f64,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("augmentation bounds must be finite"));
        }
        if self.max_rotation_deg < 0.0 || self.max_translate_frac < 0.0 {
            return Err(Error::invalid("rotation and translation bounds must be ≥ 0"));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= 1.0 && 1.0 <= self.scale_max) {
            return Err(Error::invalid(format!(
                "scale bounds must satisfy 0 < min ≤ 1 ≤ max, got [{}, {}]",
                self.scale_min, self.scale_max
            )));
        }
        if !(0.0..=1.0).contains(&self.fill_value) {
            return Err(Error::invalid("fill value must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub rotation_deg: f64,
    /// Pixels, positive moves content right.
    pub translate_x: f64,
    /// Pixels, positive moves content down.
    pub translate_y: f64,
    pub scale: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        rotation_deg: 0.0,
        translate_x: 0.0,
        translate_y: 0.0,
        scale: 1.0,
    };
}

/// Draws one warp for a `width × height` image. Consumes exactly four
/// uniforms: rotation, x shift, y shift, scale.
pub fn sample_affine(config: &AugmentConfig, width: usize, height: usize, mut rng: Rng) -> (AffineParams, Rng) {
    let r = config.max_rotation_deg;
    let tx = config.max_translate_frac * width as f64;
    let ty = config.max_translate_frac * height as f64;
    let params = AffineParams {
        rotation_deg: rng.uniform_range(-r, r),
        translate_x: rng.uniform_range(-tx, tx),
        translate_y: rng.uniform_range(-ty, ty),
        scale: rng.uniform_range(config.scale_min, config.scale_max),
    };
    (params, rng)
}

/// Inverse warp as a 2×3 matrix mapping output pixel `(x, y, 1)` to the
/// source location: `A = R(−θ)/s`, `b = c − t − A·c` with `c` the pixel
/// center of the image.
pub fn affine_matrix(params: &AffineParams, width: usize, height: usize) -> Result<[[f64; 3]; 2]> {
    if params.scale == 0.0 || !params.scale.is_finite() {
        return Err(Error::invalid(format!("affine scale must be nonzero, got {}", params.scale)));
    }
    let theta = params.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let inv = 1.0 / params.scale;
    let a = [[cos * inv, sin * inv], [-sin * inv, cos * inv]];
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let bx = cx - params.translate_x - (a[0][0] * cx + a[0][1] * cy);
    let by = cy - params.translate_y - (a[1][0] * cx + a[1][1] * cy);
    Ok([[a[0][0], a[0][1], bx], [a[1][0], a[1][1], by]])
}

/// Coordinates this close to an integer are snapped to it, so
/// grid-aligned warps (identity, integer shifts, right-angle rotations)
/// copy pixels exactly.
const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Resamples `image` (H, W, C) through `matrix`; sources outside the image
/// take `fill_value`.
pub fn warp_bilinear(image: &Tensor, matrix: &[[f64; 3]; 2], fill_value: f32) -> Tensor {
    let (h, w, c) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let src = image.data();
    let mut out = Tensor::zeros(image.shape());
    let dst = out.data_mut();
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let sx = snap(matrix[0][0] * xf + matrix[0][1] * yf + matrix[0][2]);
            let sy = snap(matrix[1][0] * xf + matrix[1][1] * yf + matrix[1][2]);
            let o = &mut dst[(y * w + x) * c..][..c];
            if !(0.0..=max_x).contains(&sx) || !(0.0..=max_y).contains(&sy) {
                o.fill(fill_value);
                continue;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let at = |yy: usize, xx: usize| (yy * w + xx) * c;
            if fx == 0.0 && fy == 0.0 {
                o.copy_from_slice(&src[at(y0, x0)..][..c]);
                continue;
            }
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let (p00, p01, p10, p11) = (at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1));
            for (ch, slot) in o.iter_mut().enumerate() {
                let top = (1.0 - fx) * src[p00 + ch] as f64 + fx * src[p01 + ch] as f64;
                let bottom = (1.0 - fx) * src[p10 + ch] as f64 + fx * src[p11 + ch] as f64;
                *slot = ((1.0 - fy) * top + fy * bottom) as f32;
            }
        }
    }
    out
}

/// Samples and applies one warp per image. Warp parameters are drawn
/// sequentially before the (parallel) resampling, so the output depends only
/// on `rng`.
pub fn expand_batch(
    images: &[Tensor],
    labels: &[usize],
    config: &AugmentConfig,
    mut rng: Rng,
) -> Result<(Vec<Tensor>, Vec<usize>, Rng)> {
    if images.is_empty() {
        return Err(Error::Empty("augmentation batch"));
    }
    if images.len() != labels.len() {
        return Err(Error::invalid("expand_batch: images and labels differ in length"));
    }
    let mut matrices = Vec::with_capacity(images.len());
    for img in images {
        let (h, w) = (img.shape()[0], img.shape()[1]);
        let (p, next) = sample_affine(config, w, h, rng);
        rng = next;
        matrices.push(affine_matrix(&p, w, h)?);
    }
    let warped = images
        .par_iter()
        .zip(&matrices)
        .map(|(img, m)| warp_bilinear(img, m, config.fill_value))
        .collect();
    Ok((warped, labels.to_vec(), rng))
}
