use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bilinear resample of an interleaved `(h, w, c)` buffer to
/// `(out_h, out_w, c)` using pixel-center alignment
/// (`src = (dst + 0.5)·in/out − 0.5`, clamped to the edge). Aspect ratio is
/// not preserved.
pub fn resize_bilinear(src: &[f32], h: usize, w: usize, c: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    assert_eq!(src.len(), h * w * c, "resize_bilinear: buffer does not match {h}x{w}x{c}");
    let axis = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, s - i0 as f64)
    };
    let cols: Vec<_> = (0..out_w).map(|x| axis(x, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, h, out_h);
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let p = |yy: usize, xx: usize| src[(yy * w + xx) * c + ch] as f64;
                let v = if fx == 0.0 && fy == 0.0 {
                    p(y0, x0)
                } else {
                    let top = (1.0 - fx) * p(y0, x0) + fx * p(y0, x1);
                    let bottom = (1.0 - fx) * p(y1, x0) + fx * p(y1, x1);
                    (1.0 - fy) * top + fy * bottom
                };
                out.push(v as f32);
            }
        }
    }
    out
}

fn decode_rgb(path: &Path) -> Result<(Vec<f32>, usize, usize)> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            message: "image has no pixels".into(),
        });
    }
    Ok((rgb.into_raw().into_iter().map(f32::from).collect(), h, w))
}

/// Decodes an image and resamples it to `size × size` RGB, scaled to [0, 1].
pub fn load_resize(path: &Path, size: usize) -> Result<Tensor> {
    let (raw, h, w) = decode_rgb(path)?;
    let data = resize_bilinear(&raw, h, w, 3, size, size).into_iter().map(|v| v / 255.0).collect();
    Tensor::from_vec(&[size, size, 3], data)
}

/// As [`load_resize`] but quantized back to bytes for packing.
pub fn load_resize_bytes(path: &Path, size: usize) -> Result<Vec<u8>> {
    let (raw, h, w) = decode_rgb(path)?;
    Ok(resize_bilinear(&raw, h, w, 3, size, size)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect())
}
