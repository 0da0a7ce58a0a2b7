//! Model checkpoints, little-endian:
//!
//! ```text
//! "RFCK" | version u16 | header_len u32 | header (JSON: config, meta)
//! dtype u8 (4 = f32, 8 = f64) | count u32
//! count × { name_len u16 | name | ndim u8 | dims u64 × ndim | values }
//! ```
//!
//! Learnable tensors come first in their canonical order, then thresholds
//! and fixed eigenbases.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::real::Real;

pub const MAGIC: &[u8; 4] = b"RFCK";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: BTreeMap<String, String>,
}

/// A model plus free-form string metadata (epoch, metrics ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub meta: BTreeMap<String, String>,
}

struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn collect<T: Real>(model: &Model<T>) -> Vec<Tensor> {
    let p = &model.params;
    let shapes = shapes_of(model);
    let mut out: Vec<Tensor> = p
        .tensors()
        .into_iter()
        .zip(shapes)
        .map(|((name, _, d), shape)| Tensor { name, shape, data: d.iter().map(|v| v.f64()).collect() })
        .collect();
    for (l, layer) in p.layers.iter().enumerate() {
        out.push(Tensor { name: format!("layers.{l}.threshold"), shape: vec![], data: vec![layer.threshold.f64()] });
        if let Some(b) = &layer.fixed_basis {
            for (part, a) in [("re", &b.re), ("im", &b.im)] {
                out.push(Tensor {
                    name: format!("layers.{l}.basis_{part}"),
                    shape: a.shape().to_vec(),
                    data: a.iter().map(|v| v.f64()).collect(),
                });
            }
        }
    }
    out
}

fn shapes_of<T: Real>(model: &Model<T>) -> Vec<Vec<usize>> {
    let p = &model.params;
    let mut s = vec![p.encoder.weight.shape().to_vec()];
    if let Some(b) = &p.encoder.bias {
        s.push(b.shape().to_vec());
    }
    for l in &p.layers {
        s.push(l.log_neg_real.shape().to_vec());
        s.push(l.freq.shape().to_vec());
        s.push(l.log_eta.shape().to_vec());
        s.push(l.conn_re.shape().to_vec());
        s.push(l.conn_im.shape().to_vec());
    }
    s.push(p.readout.weight.shape().to_vec());
    if let Some(b) = &p.readout.bias {
        s.push(b.shape().to_vec());
    }
    s.push(p.readout.log_tau.shape().to_vec());
    s
}

fn dtype_code(dtype: &str) -> u8 {
    if dtype == "f32" {
        4
    } else {
        8
    }
}

pub fn write_checkpoint<T: Real>(ck: &Checkpoint<T>, mut w: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&Header { config: ck.model.config.clone(), meta: ck.meta.clone() })
        .map_err(|e| Error::format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let code = dtype_code(T::DTYPE);
    w.write_all(&[code])?;
    let tensors = collect(&ck.model);
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.name.len() as u16).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&[t.shape.len() as u8])?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data {
            if code == 4 {
                w.write_all(&(v as f32).to_le_bytes())?;
            } else {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::format(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn assign<T: Real>(dst: &mut [T], t: &Tensor) -> Result<()> {
    if dst.len() != t.data.len() {
        return Err(Error::format(format!("tensor {} has {} values, expected {}", t.name, t.data.len(), dst.len())));
    }
    dst.iter_mut().zip(&t.data).for_each(|(d, &v)| *d = T::of(v));
    Ok(())
}

/// Read a checkpoint, converting values to `T`.
pub fn read_checkpoint<T: Real>(mut r: impl Read) -> Result<Checkpoint<T>> {
    if &bytes::<4>(&mut r)? != MAGIC {
        return Err(Error::format("bad checkpoint magic"));
    }
    let version = u16::from_le_bytes(bytes(&mut r)?);
    if version != VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes(&mut r)?) as usize;
    let mut hbuf = vec![0u8; hlen];
    r.read_exact(&mut hbuf).map_err(|e| Error::format(format!("truncated checkpoint header: {e}")))?;
    let header: Header = serde_json::from_slice(&hbuf).map_err(|e| Error::format(format!("checkpoint header: {e}")))?;
    let [code] = bytes::<1>(&mut r)?;
    if code != 4 && code != 8 {
        return Err(Error::format(format!("unknown dtype code {code}")));
    }
    let count = u32::from_le_bytes(bytes(&mut r)?) as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let nlen = u16::from_le_bytes(bytes(&mut r)?) as usize;
        let mut name = vec![0u8; nlen];
        r.read_exact(&mut name).map_err(|e| Error::format(e.to_string()))?;
        let name = String::from_utf8(name).map_err(|_| Error::format("tensor name is not UTF-8"))?;
        let [ndim] = bytes::<1>(&mut r)?;
        let shape = (0..ndim).map(|_| Ok(u64::from_le_bytes(bytes(&mut r)?) as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                Ok(if code == 4 { f32::from_le_bytes(bytes(&mut r)?) as f64 } else { f64::from_le_bytes(bytes(&mut r)?) })
            })
            .collect::<Result<Vec<_>>>()?;
        tensors.insert(name.clone(), Tensor { name, shape, data });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after checkpoint"));
    }

    let mut model: Model<T> = Model::init(&header.config)?.cast();
    let expected = collect(&model);
    if expected.len() != tensors.len() {
        return Err(Error::format(format!("checkpoint holds {} tensors, config implies {}", tensors.len(), expected.len())));
    }
    for e in &expected {
        let t = tensors.get(&e.name).ok_or_else(|| Error::format(format!("missing tensor {}", e.name)))?;
        if t.shape != e.shape {
            return Err(Error::format(format!("tensor {} has shape {:?}, expected {:?}", e.name, t.shape, e.shape)));
        }
    }
    for (name, _, dst) in model.params.tensors_mut() {
        assign(dst, &tensors[&name])?;
    }
    for (l, layer) in model.params.layers.iter_mut().enumerate() {
        layer.threshold = T::of(tensors[&format!("layers.{l}.threshold")].data[0]);
        if let Some(b) = &mut layer.fixed_basis {
            assign(b.re.as_slice_mut().expect("standard layout"), &tensors[&format!("layers.{l}.basis_re")])?;
            assign(b.im.as_slice_mut().expect("standard layout"), &tensors[&format!("layers.{l}.basis_im")])?;
        }
    }
    Ok(Checkpoint { model, meta: header.meta })
}

pub fn save_checkpoint<T: Real>(ck: &Checkpoint<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(ck, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    read_checkpoint(std::fs::read(path)?.as_slice())
}
