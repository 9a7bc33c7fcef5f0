//! Image ingestion, fixed-resolution resizing, stratified splitting and the
//! packed binary container, plus the procedural benchmark generator.

mod packed;
mod resize;
mod synth;

use std::path::{Path, PathBuf};

pub use packed::{pack, PackReport, PackedDataset, Record, PACKED_MAGIC};
pub use resize::{load_resize, load_resize_bytes, resize_bilinear};
pub use synth::{make_synthetic, synthetic_class_names, SYNTH_CLASSES};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Side length images are resampled to on ingestion.
pub const IMAGE_SIZE: usize = 128;

/// File extensions accepted by [`ingest_directory`] (compared case-insensitively).
pub const RASTER_EXTENSIONS: &[&str] = &[
    "png", "jpg", "jpeg", "bmp", "gif", "tif", "tiff", "webp", "ppm", "pgm", "pnm",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestItem {
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub items: Vec<ManifestItem>,
    /// Directory entries that could not be read during enumeration.
    pub skipped: usize,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.classes.len();
        let mut counts = vec![0usize; k];
        for item in &self.items {
            if item.label >= k {
                return Err(Error::LabelOutOfRange { label: item.label, classes: k });
            }
            counts[item.label] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::EmptyClass(self.classes[c].clone()));
        }
        Ok(())
    }
}

/// Decoded images with labels; what training and evaluation consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub classes: Vec<String>,
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn image_refs(&self) -> Vec<&Tensor> {
        self.images.iter().collect()
    }

    /// Images and labels at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> ImageSet {
        ImageSet {
            classes: self.classes.clone(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn has_raster_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| RASTER_EXTENSIONS.iter().any(|r| r.eq_ignore_ascii_case(e)))
}

/// Enumerates `root/<class>/<image>`. Classes are the subdirectory names in
/// byte order; items are listed in path order.
pub fn ingest_directory(root: &Path) -> Result<DatasetManifest> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut skipped = 0;
    let mut class_dirs = Vec::new();
    for entry in entries {
        match entry {
            Ok(e) if e.path().is_dir() => match e.file_name().into_string() {
                Ok(name) => class_dirs.push((name, e.path())),
                Err(_) => skipped += 1,
            },
            Ok(_) => {}
            Err(_) => skipped += 1,
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Empty("dataset root (no class subdirectories)"));
    }
    class_dirs.sort();

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut items = Vec::new();
    for (label, (name, dir)) in class_dirs.into_iter().enumerate() {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            match entry {
                Ok(e) if e.path().is_file() && has_raster_extension(&e.path()) => files.push(e.path()),
                Ok(_) => {}
                Err(_) => skipped += 1,
            }
        }
        if files.is_empty() {
            return Err(Error::EmptyClass(name));
        }
        files.sort();
        items.extend(files.into_iter().map(|path| ManifestItem { path, label }));
        classes.push(name);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} unreadable entries under {}", root.display());
    }
    Ok(DatasetManifest {
        classes,
        items,
        skipped,
    })
}

/// Stratified split over item indices: each class's indices are shuffled with
/// the seeded generator (classes in label order), and the first
/// `floor(train_frac · n_c)` go to training. Returned index lists are sorted.
pub fn split_indices(
    labels: &[usize],
    classes: &[String],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid(format!("train fraction must lie in (0, 1), got {train_frac}")));
    }
    let k = classes.len();
    let mut by_class = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::LabelOutOfRange { label: l, classes: k });
        }
        by_class[l].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                name: classes[c].clone(),
                count: idx.len(),
            });
        }
        rng.shuffle(&mut idx);
        let n_train = (train_frac * idx.len() as f64).floor() as usize;
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// [`split_indices`] applied to a manifest.
pub fn split(manifest: &DatasetManifest, train_frac: f64, seed: u64) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train, test) = split_indices(&manifest.labels(), &manifest.classes, train_frac, seed)?;
    let pick = |idx: &[usize]| DatasetManifest {
        classes: manifest.classes.clone(),
        items: idx.iter().map(|&i| manifest.items[i].clone()).collect(),
        skipped: 0,
    };
    Ok((pick(&train), pick(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn ten_items_split_eight_two() {
        let labels = vec![0; 10];
        let (train, test) = split_indices(&labels, &names(1), 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
    }

    #[test]
    fn table_one_counts() {
        let counts = [1050, 310, 327, 519, 626, 296, 639, 1248, 352, 455];
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        assert_eq!(labels.len(), 5822);
        let (train, test) = split_indices(&labels, &names(10), 0.8, 0).unwrap();
        // integer oracle: floor(4n/5) per class
        let expected: usize = counts.iter().map(|n| n * 4 / 5).sum();
        assert_eq!(expected, 4654);
        assert_eq!((train.len(), test.len()), (expected, 5822 - expected));
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split_indices(&[0, 0], &names(1), 1.0, 0).is_err());
        assert!(split_indices(&[0, 0], &names(1), 0.0, 0).is_err());
        assert!(matches!(
            split_indices(&[0, 0, 1], &names(2), 0.5, 0),
            Err(Error::ClassTooSmall { count: 1, .. })
        ));
    }

    #[test]
    fn ingest_sorts_bytewise_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_directory(dir.path()).is_err());
        for name in ["banana", "Apple", "cherry"] {
            std::fs::create_dir(dir.path().join(name)).unwrap();
            std::fs::write(dir.path().join(name).join("b.png"), b"x").unwrap();
            std::fs::write(dir.path().join(name).join("a.JPG"), b"x").unwrap();
            std::fs::write(dir.path().join(name).join("notes.txt"), b"x").unwrap();
        }
        let m = ingest_directory(dir.path()).unwrap();
        assert_eq!(m.classes, vec!["Apple", "banana", "cherry"]);
        assert_eq!(m.items.len(), 6);
        assert!(m.items[0].path.ends_with("Apple/a.JPG"));
        assert_eq!(m.labels(), vec![0, 0, 1, 1, 2, 2]);

        std::fs::create_dir(dir.path().join("durian")).unwrap();
        match ingest_directory(dir.path()) {
            Err(Error::EmptyClass(name)) => assert_eq!(name, "durian"),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }
}
