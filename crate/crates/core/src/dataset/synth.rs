//! Procedural ten-class benchmark: one colored geometric motif per class on a
//! noisy low-saturation background, with randomized position, size, rotation
//! and hue. Classes 0/1 and 2/3 share a shape and differ only in color, so a
//! grayscale pipeline cannot fully separate them.

use rayon::prelude::*;

use super::packed::{PackedDataset, Record};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const SYNTH_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy)]
enum Motif {
    Disk,
    Triangle,
    HorizontalStripes,
    Ring,
    Checker,
    Square,
    Cross,
    DiagonalStripes,
}

/// (motif, base hue in degrees) per class.
const CLASSES: [(Motif, f64); SYNTH_CLASSES] = [
    (Motif::Disk, 0.0),
    (Motif::Disk, 220.0),
    (Motif::Triangle, 120.0),
    (Motif::Triangle, 55.0),
    (Motif::HorizontalStripes, 30.0),
    (Motif::Ring, 280.0),
    (Motif::Checker, 185.0),
    (Motif::Square, 320.0),
    (Motif::Cross, 160.0),
    (Motif::DiagonalStripes, 90.0),
];

impl Motif {
    /// Point test in motif-local coordinates, unit radius.
    fn contains(self, u: f64, v: f64) -> bool {
        let inside_box = |b: f64| u.abs() <= b && v.abs() <= b;
        match self {
            Motif::Disk => u * u + v * v <= 1.0,
            Motif::Triangle => v <= 0.5 && v >= -1.0 + 3f64.sqrt() * u.abs(),
            Motif::HorizontalStripes => inside_box(0.9) && ((v + 0.9) / 0.36).floor() as i64 % 2 == 0,
            Motif::Ring => {
                let r2 = u * u + v * v;
                (0.3025..=1.0).contains(&r2)
            }
            Motif::Checker => {
                inside_box(0.9) && (((u + 0.9) / 0.45).floor() as i64 + ((v + 0.9) / 0.45).floor() as i64) % 2 == 0
            }
            Motif::Square => inside_box(0.8),
            Motif::Cross => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
            Motif::DiagonalStripes => inside_box(0.9) && ((u + v + 1.8) / 0.4).floor() as i64 % 2 == 0,
        }
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn render(class: usize, size: usize, mut rng: Rng) -> Vec<u8> {
    let (motif, hue) = CLASSES[class];
    let s = size as f64;
    let cx = rng.uniform_range(0.3, 0.7) * s;
    let cy = rng.uniform_range(0.3, 0.7) * s;
    let radius = rng.uniform_range(0.18, 0.3) * s;
    let angle = rng.uniform_range(-25.0, 25.0).to_radians();
    let fg = hsv_to_rgb(
        hue + rng.uniform_range(-12.0, 12.0),
        rng.uniform_range(0.7, 1.0),
        rng.uniform_range(0.75, 1.0),
    );
    let dark_bg = rng.uniform() < 0.5;
    let bg_value = if dark_bg {
        rng.uniform_range(0.05, 0.3)
    } else {
        rng.uniform_range(0.55, 0.8)
    };
    let bg = hsv_to_rgb(rng.uniform_range(0.0, 360.0), rng.uniform_range(0.0, 0.25), bg_value);
    let noise = 0.08;
    let (sin, cos) = angle.sin_cos();

    let mut out = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let mut hits = 0;
            for (oy, ox) in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)] {
                let dx = x as f64 + ox - cx;
                let dy = y as f64 + oy - cy;
                let u = (cos * dx + sin * dy) / radius;
                let v = (-sin * dx + cos * dy) / radius;
                hits += motif.contains(u, v) as u32;
            }
            let alpha = hits as f64 / 4.0;
            for ch in 0..3 {
                let base = bg[ch] * (1.0 - alpha) + fg[ch] * alpha;
                let v = base + rng.uniform_range(-noise, noise);
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    out
}

pub fn synthetic_class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|i| format!("class{i}")).collect()
}

/// Renders `per_class` images for each of the first `classes` motifs
/// (records grouped by class). Every image draws from its own generator
/// forked in record order, so output is independent of thread count.
pub fn make_synthetic(classes: usize, per_class: usize, seed: u64, size: usize) -> Result<PackedDataset> {
    if !(2..=SYNTH_CLASSES).contains(&classes) {
        return Err(Error::invalid(format!("synthetic classes must be in 2..={SYNTH_CLASSES}, got {classes}")));
    }
    if per_class < 2 {
        return Err(Error::invalid("synthetic per_class must be ≥ 2"));
    }
    if !(8..=u16::MAX as usize).contains(&size) {
        return Err(Error::invalid(format!("synthetic image size {size} out of range")));
    }
    let mut rng = Rng::new(seed);
    let jobs: Vec<(usize, Rng)> = (0..classes)
        .flat_map(|c| std::iter::repeat_n(c, per_class))
        .map(|c| (c, rng.fork()))
        .collect();
    let records = jobs
        .into_par_iter()
        .map(|(c, r)| Record {
            label: c as u8,
            pixels: render(c, size, r),
        })
        .collect();
    Ok(PackedDataset {
        width: size,
        height: size,
        channels: 3,
        class_names: synthetic_class_names(classes),
        records,
    })
}
