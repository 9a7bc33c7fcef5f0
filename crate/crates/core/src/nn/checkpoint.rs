//! Binary checkpoint format.
//!
//! ```text
//! magic       "CNCK1\0"
//! u32         record count (input record + layers)
//! records     u8 kind tag, then that kind's u32 extents:
//!               0 input    height, width, channels
//!               1 conv     kernel, in_channels, filters
//!               2 maxpool  -
//!               3 relu     -
//!               4 dropout  rate (IEEE-754 bits of an f32)
//!               5 flatten  -
//!               6 dense    inputs, units
//!               7 softmax  -
//! params      per parameterized layer: weight then bias, f32
//! u32         class-name count, then per name u32 byte length + UTF-8
//! ```
//! All integers and reals little-endian.

use std::path::Path;

use super::layer::LayerSpec;
use super::model::{chain_shapes, layer_shapes, NetworkModel, Params};
use crate::binio::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"CNCK1\0";

const TAG_INPUT: u8 = 0;
const TAG_CONV: u8 = 1;
const TAG_MAXPOOL: u8 = 2;
const TAG_RELU: u8 = 3;
const TAG_DROPOUT: u8 = 4;
const TAG_FLATTEN: u8 = 5;
const TAG_DENSE: u8 = 6;
const TAG_SOFTMAX: u8 = 7;

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("extent {v} does not fit in u32")))
}

pub fn checkpoint_bytes(model: &NetworkModel) -> Result<Vec<u8>> {
    let shapes = chain_shapes(&model.input_shape(), model.layers(), model.num_classes())?;
    let mut w = Writer::new(CHECKPOINT_MAGIC);
    w.u32(u32_of(model.layers().len() + 1)?);
    w.u8(TAG_INPUT);
    for e in model.input_shape() {
        w.u32(u32_of(e)?);
    }
    for (layer, input) in model.layers().iter().zip(&shapes) {
        match *layer {
            LayerSpec::Conv { kernel, filters } => {
                w.u8(TAG_CONV);
                w.u32(u32_of(kernel)?);
                w.u32(u32_of(input[2])?);
                w.u32(u32_of(filters)?);
            }
            LayerSpec::MaxPool => w.u8(TAG_MAXPOOL),
            LayerSpec::Relu => w.u8(TAG_RELU),
            LayerSpec::Dropout { rate } => {
                w.u8(TAG_DROPOUT);
                w.u32(rate.to_bits());
            }
            LayerSpec::Flatten => w.u8(TAG_FLATTEN),
            LayerSpec::Dense { units } => {
                w.u8(TAG_DENSE);
                w.u32(u32_of(input[0])?);
                w.u32(u32_of(units)?);
            }
            LayerSpec::Softmax => w.u8(TAG_SOFTMAX),
        }
    }
    for p in model.params() {
        w.f32s(p.weight.data());
        w.f32s(p.bias.data());
    }
    w.u32(u32_of(model.class_names().len())?);
    for name in model.class_names() {
        w.u32(u32_of(name.len())?);
        w.bytes(name.as_bytes());
    }
    Ok(w.into_bytes())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, "CNCK1")?;
    let count = r.u32("layer count")? as usize;
    if count == 0 {
        return Err(Error::InconsistentHeader("no input record".into()));
    }
    if r.u8("input record")? != TAG_INPUT {
        return Err(Error::InconsistentHeader("first record must describe the input".into()));
    }
    let mut input = [0usize; 3];
    for e in &mut input {
        *e = r.u32("input extents")? as usize;
    }

    // declared parameter shapes, checked against the chain below
    let mut declared = Vec::new();
    let mut layers = Vec::with_capacity(count - 1);
    for _ in 1..count {
        let tag = r.u8("layer tag")?;
        let layer = match tag {
            TAG_CONV => {
                let kernel = r.u32("conv extents")? as usize;
                let cin = r.u32("conv extents")? as usize;
                let filters = r.u32("conv extents")? as usize;
                declared.push(vec![kernel, kernel, cin, filters]);
                LayerSpec::Conv { kernel, filters }
            }
            TAG_MAXPOOL => LayerSpec::MaxPool,
            TAG_RELU => LayerSpec::Relu,
            TAG_DROPOUT => LayerSpec::Dropout {
                rate: f32::from_bits(r.u32("dropout rate")?),
            },
            TAG_FLATTEN => LayerSpec::Flatten,
            TAG_DENSE => {
                let inputs = r.u32("dense extents")? as usize;
                let units = r.u32("dense extents")? as usize;
                declared.push(vec![inputs, units]);
                LayerSpec::Dense { units }
            }
            TAG_SOFTMAX => LayerSpec::Softmax,
            other => return Err(Error::InconsistentHeader(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }

    let shapes = layer_shapes(&input, &layers).map_err(|e| Error::InconsistentHeader(e.to_string()))?;
    let mut di = 0;
    for (layer, in_shape) in layers.iter().zip(&shapes) {
        let actual = match *layer {
            LayerSpec::Conv { kernel, filters } => vec![kernel, kernel, in_shape[2], filters],
            LayerSpec::Dense { units } => vec![in_shape[0], units],
            _ => continue,
        };
        if declared[di] != actual {
            return Err(Error::InconsistentHeader(format!(
                "layer declares weight shape {:?} but the chain implies {actual:?}",
                declared[di]
            )));
        }
        di += 1;
    }

    let mut params = Vec::with_capacity(declared.len());
    for shape in &declared {
        let n: usize = shape.iter().product();
        let weight = Tensor::from_vec(shape, r.f32s(n, "parameters")?)?;
        let out = *shape.last().unwrap();
        let bias = Tensor::from_vec(&[out], r.f32s(out, "parameters")?)?;
        params.push(Params { weight, bias });
    }

    let n_names = r.u32("class-name count")? as usize;
    let names = (0..n_names)
        .map(|_| r.string_u32("class name"))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    NetworkModel::from_parts(input, layers, params, names).map_err(|e| Error::InconsistentHeader(e.to_string()))
}

pub fn save_checkpoint(model: &NetworkModel, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkModel> {
    checkpoint_from_bytes(&read_file(path)?)
}
