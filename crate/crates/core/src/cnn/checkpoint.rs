//! `QCNN` model files, little-endian: `"QCNN"`, version `u16 = 1`, layer
//! count `u8`, then per layer a kind `u8` and its dims as `u32`s, then every
//! weight and bias as `f32` in layer order (weights before bias).
//!
//! | kind | layer   | dims         |
//! |------|---------|--------------|
//! | 0    | input   | H, W, C      |
//! | 1    | conv    | F, k, k, C   |
//! | 2    | ReLU    | none         |
//! | 3    | flatten | none         |
//! | 4    | dense   | m, n         |

use std::path::Path;

use super::layers::{Conv2d, Dense};
use super::model::{CnnModel, Layer};
use super::tensor::{Real, Tensor};
use crate::binio::{read_file, write_file, ByteReader};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"QCNN";
const VERSION: u16 = 1;

const KIND_INPUT: u8 = 0;
const KIND_CONV: u8 = 1;
const KIND_RELU: u8 = 2;
const KIND_FLATTEN: u8 = 3;
const KIND_DENSE: u8 = 4;

fn push_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Argument(format!("dimension {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint<T: Real>(model: &CnnModel<T>) -> Result<Vec<u8>> {
    let layers = model.layers();
    let count = u8::try_from(layers.len() + 1).map_err(|_| Error::Argument("too many layers for QCNN".into()))?;
    let mut out = Vec::with_capacity(16 + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(count);
    out.push(KIND_INPUT);
    for d in model.input_shape() {
        push_u32(&mut out, d)?;
    }
    for layer in layers {
        let (kind, dims): (u8, &[usize]) = match layer {
            Layer::Conv(c) => (KIND_CONV, c.weights.shape()),
            Layer::Relu => (KIND_RELU, &[]),
            Layer::Flatten => (KIND_FLATTEN, &[]),
            Layer::Dense(d) => (KIND_DENSE, d.weights.shape()),
        };
        out.push(kind);
        for &d in dims {
            push_u32(&mut out, d)?;
        }
    }
    for (w, b) in model.parameters() {
        for v in w.data().iter().chain(b.data()) {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<CnnModel<T>> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, reason: format!("unsupported version {version}") });
    }
    let count = r.u8("layer count")?;
    let first = r.offset();
    if count == 0 || r.u8("layer kind")? != KIND_INPUT {
        return Err(Error::Format { offset: first, reason: "topology must start with an input layer".into() });
    }
    let dims = |r: &mut ByteReader, n: usize| -> Result<Vec<usize>> {
        (0..n).map(|_| r.u32("layer dimension").map(|v| v as usize)).collect()
    };
    let input = dims(&mut r, 3)?;
    let mut shapes = Vec::with_capacity(count as usize - 1);
    for _ in 1..count {
        let at = r.offset();
        let kind = r.u8("layer kind")?;
        let layer_dims = match kind {
            KIND_CONV => dims(&mut r, 4)?,
            KIND_RELU | KIND_FLATTEN => Vec::new(),
            KIND_DENSE => dims(&mut r, 2)?,
            other => return Err(Error::Format { offset: at, reason: format!("unknown layer kind {other}") }),
        };
        shapes.push((at, kind, layer_dims));
    }
    let params = |r: &mut ByteReader, shape: Vec<usize>| -> Result<Tensor<T>> {
        let len: usize = shape.iter().product();
        let raw = r.take(len.saturating_mul(4), "parameters")?;
        let data = raw.chunks_exact(4).map(|c| T::from_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
        Tensor::new(shape, data)
    };
    let mut layers = Vec::with_capacity(shapes.len());
    for (at, kind, d) in shapes {
        let layer = match kind {
            KIND_CONV => {
                let bias = vec![d[0]];
                let w = params(&mut r, d)?;
                let b = params(&mut r, bias)?;
                Layer::Conv(Conv2d::new(w, b).map_err(|e| Error::Format { offset: at, reason: e.to_string() })?)
            }
            KIND_DENSE => {
                let bias = vec![d[0]];
                let w = params(&mut r, d)?;
                let b = params(&mut r, bias)?;
                Layer::Dense(Dense::new(w, b).map_err(|e| Error::Format { offset: at, reason: e.to_string() })?)
            }
            KIND_RELU => Layer::Relu,
            _ => Layer::Flatten,
        };
        layers.push(layer);
    }
    r.finish()?;
    CnnModel::from_layers([input[0], input[1], input[2]], layers)
}

pub fn write_checkpoint<T: Real>(model: &CnnModel<T>, path: &Path) -> Result<()> {
    write_file(path, &encode_checkpoint(model)?)
}

pub fn read_checkpoint<T: Real>(path: &Path) -> Result<CnnModel<T>> {
    decode_checkpoint(&read_file(path)?)
}
