use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{load_resize_bytes, split_indices, DatasetManifest, ImageSet};
use crate::binio::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PACKED_MAGIC: &[u8; 6] = b"FIMG1\0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub label: u8,
    /// Row-major, channel-interleaved bytes.
    pub pixels: Vec<u8>,
}

/// Fixed-resolution labeled image container.
///
/// Layout: magic `FIMG1\0`, u32 record count, u16 width, u16 height,
/// u8 channels, u8 class count, class names (u16 byte length + UTF-8),
/// then per record a u8 label followed by `width·height·channels` bytes.
/// All integers little-endian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedDataset {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub class_names: Vec<String>,
    pub records: Vec<Record>,
}

impl PackedDataset {
    pub fn record_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 {
            return Err(Error::InconsistentHeader("zero image extent".into()));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize || self.channels > u8::MAX as usize {
            return Err(Error::InconsistentHeader("image extents exceed the header field widths".into()));
        }
        if self.class_names.len() > u8::MAX as usize {
            return Err(Error::InconsistentHeader(format!("{} classes exceed the u8 class field", self.class_names.len())));
        }
        for r in &self.records {
            if r.label as usize >= self.class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label: r.label as usize,
                    classes: self.class_names.len(),
                });
            }
            if r.pixels.len() != self.record_len() {
                return Err(Error::InconsistentHeader(format!(
                    "record has {} bytes, expected {}",
                    r.pixels.len(),
                    self.record_len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut w = Writer::new(PACKED_MAGIC);
        w.u32(u32::try_from(self.records.len()).map_err(|_| Error::invalid("too many records"))?);
        w.u16(self.width as u16);
        w.u16(self.height as u16);
        w.u8(self.channels as u8);
        w.u8(self.class_names.len() as u8);
        for name in &self.class_names {
            let len = u16::try_from(name.len()).map_err(|_| Error::invalid("class name too long"))?;
            w.u16(len);
            w.bytes(name.as_bytes());
        }
        for r in &self.records {
            w.u8(r.label);
            w.bytes(&r.pixels);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, PACKED_MAGIC, "FIMG1")?;
        let count = r.u32("record count")? as usize;
        let width = r.u16("width")? as usize;
        let height = r.u16("height")? as usize;
        let channels = r.u8("channels")? as usize;
        let classes = r.u8("class count")? as usize;
        let class_names = (0..classes)
            .map(|_| r.string_u16("class name"))
            .collect::<Result<Vec<_>>>()?;
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InconsistentHeader("zero image extent".into()));
        }
        let len = width * height * channels;
        let mut records = Vec::with_capacity(count.min(bytes.len() / (len + 1)));
        for _ in 0..count {
            let label = r.u8("record label")?;
            if label as usize >= classes {
                return Err(Error::LabelOutOfRange {
                    label: label as usize,
                    classes,
                });
            }
            let pixels = r.take(len, "record pixels")?.to_vec();
            records.push(Record { label, pixels });
        }
        r.finish()?;
        Ok(Self {
            width,
            height,
            channels,
            class_names,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label as usize).collect()
    }

    pub fn image(&self, index: usize) -> Tensor {
        let data = self.records[index].pixels.iter().map(|&b| b as f32 / 255.0).collect();
        Tensor::from_vec(&[self.height, self.width, self.channels], data).expect("record length validated")
    }

    /// Decodes every record to a [0, 1] tensor.
    pub fn to_image_set(&self) -> ImageSet {
        ImageSet {
            classes: self.class_names.clone(),
            images: (0..self.records.len()).map(|i| self.image(i)).collect(),
            labels: self.labels(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> PackedDataset {
        PackedDataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            class_names: self.class_names.clone(),
            ..*self
        }
    }

    /// Stratified split; see [`split_indices`].
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<(PackedDataset, PackedDataset)> {
        let (train, test) = split_indices(&self.labels(), &self.class_names, train_frac, seed)?;
        Ok((self.subset(&train), self.subset(&test)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackReport {
    pub records: usize,
    /// Files that failed to decode and were left out.
    pub skipped: Vec<PathBuf>,
}

/// Decodes, resizes to `size × size`, and writes every manifest item.
/// Undecodable files are skipped and reported; a class left without any
/// decodable image is an error.
pub fn pack(manifest: &DatasetManifest, output: &Path, size: usize) -> Result<(PackedDataset, PackReport)> {
    manifest.validate()?;
    let decoded: Vec<_> = manifest
        .items
        .par_iter()
        .map(|item| load_resize_bytes(&item.path, size))
        .collect();
    let mut records = Vec::with_capacity(decoded.len());
    let mut skipped = Vec::new();
    let mut seen = vec![false; manifest.classes.len()];
    for (item, result) in manifest.items.iter().zip(decoded) {
        match result {
            Ok(pixels) => {
                seen[item.label] = true;
                records.push(Record {
                    label: u8::try_from(item.label).map_err(|_| Error::LabelOutOfRange {
                        label: item.label,
                        classes: u8::MAX as usize,
                    })?,
                    pixels,
                });
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", item.path.display());
                skipped.push(item.path.clone());
            }
        }
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::EmptyClass(manifest.classes[c].clone()));
    }
    let dataset = PackedDataset {
        width: size,
        height: size,
        channels: 3,
        class_names: manifest.classes.clone(),
        records,
    };
    dataset.save(output)?;
    let report = PackReport {
        records: dataset.len(),
        skipped,
    };
    Ok((dataset, report))
}
