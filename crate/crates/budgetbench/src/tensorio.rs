//! Minimal reader/writer for the safetensors container format:
//! an 8-byte little-endian header length, a JSON header mapping tensor
//! names to `{dtype, shape, data_offsets}`, then the raw little-endian
//! data buffer. Only the dtypes the quantizer needs are supported.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    F32,
    F64,
    I8,
    I32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::I8 => 1,
            Dtype::F32 | Dtype::I32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// An owned tensor: dtype, shape, and raw little-endian bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl Tensor {
    pub fn new(dtype: Dtype, shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel * dtype.size() {
            return Err(Error::TensorFormat(format!(
                "data length {} does not match shape {:?} of dtype {:?}",
                data.len(),
                shape,
                dtype
            )));
        }
        Ok(Tensor { dtype, shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, values: &[f32]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor::new(Dtype::F32, shape, data)
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor::new(Dtype::F64, shape, data)
    }

    pub fn from_i32(shape: Vec<usize>, values: &[i32]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Tensor::new(Dtype::I32, shape, data)
    }

    pub fn from_i8(shape: Vec<usize>, values: &[i8]) -> Result<Self> {
        let data = values.iter().map(|v| *v as u8).collect();
        Tensor::new(Dtype::I8, shape, data)
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    /// Numeric values promoted to f64, regardless of storage dtype.
    pub fn to_f64(&self) -> Vec<f64> {
        match self.dtype {
            Dtype::F32 => self
                .data
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect(),
            Dtype::F64 => self
                .data
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
            Dtype::I32 => self
                .data
                .chunks_exact(4)
                .map(|b| f64::from(i32::from_le_bytes(b.try_into().unwrap())))
                .collect(),
            Dtype::I8 => self.data.iter().map(|b| f64::from(*b as i8)).collect(),
        }
    }

    pub fn to_i32(&self) -> Result<Vec<i32>> {
        match self.dtype {
            Dtype::I32 => Ok(self
                .data
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
                .collect()),
            Dtype::I8 => Ok(self.data.iter().map(|b| i32::from(*b as i8)).collect()),
            other => Err(Error::TensorFormat(format!(
                "expected integer tensor, got {other:?}"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: [usize; 2],
}

fn dtype_name(d: Dtype) -> &'static str {
    match d {
        Dtype::F32 => "F32",
        Dtype::F64 => "F64",
        Dtype::I8 => "I8",
        Dtype::I32 => "I32",
    }
}

fn dtype_from_name(s: &str) -> Result<Dtype> {
    match s {
        "F32" => Ok(Dtype::F32),
        "F64" => Ok(Dtype::F64),
        "I8" => Ok(Dtype::I8),
        "I32" => Ok(Dtype::I32),
        other => Err(Error::TensorFormat(format!("unsupported dtype {other}"))),
    }
}

/// Writes tensors in name order; byte-stable for identical inputs.
pub fn save_safetensors(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let mut header: BTreeMap<&str, HeaderEntry> = BTreeMap::new();
    let mut offset = 0usize;
    for (name, t) in tensors {
        let end = offset + t.data.len();
        header.insert(
            name,
            HeaderEntry {
                dtype: dtype_name(t.dtype).to_string(),
                shape: t.shape.clone(),
                data_offsets: [offset, end],
            },
        );
        offset = end;
    }
    let header_json = serde_json::to_vec(&header)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&(header_json.len() as u64).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    f.write_all(&header_json).map_err(|e| Error::io(path, e))?;
    for t in tensors.values() {
        f.write_all(&t.data).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn load_safetensors(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut len_bytes = [0u8; 8];
    f.read_exact(&mut len_bytes).map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    if header_len > 100 << 20 {
        return Err(Error::TensorFormat("unreasonable header length".into()));
    }
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes).map_err(|e| Error::io(path, e))?;
    let header: BTreeMap<String, serde_json::Value> = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::TensorFormat(format!("bad header: {e}")))?;
    let mut data = Vec::new();
    f.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;

    let mut out = BTreeMap::new();
    for (name, value) in header {
        if name == "__metadata__" {
            continue;
        }
        let entry: HeaderEntry = serde_json::from_value(value)
            .map_err(|e| Error::TensorFormat(format!("bad entry for {name}: {e}")))?;
        let [start, end] = entry.data_offsets;
        if end < start || end > data.len() {
            return Err(Error::TensorFormat(format!("offsets out of range for {name}")));
        }
        let tensor = Tensor::new(
            dtype_from_name(&entry.dtype)?,
            entry.shape,
            data[start..end].to_vec(),
        )?;
        out.insert(name, tensor);
    }
    Ok(out)
}
