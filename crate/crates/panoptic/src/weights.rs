//! Flat binary tensor container:
//!
//! ```text
//! u64 LE   header length N
//! N bytes  JSON {"tensors": [{"name": str, "shape": [usize]}], ...}
//! f32 LE   tensor data, in header order, row-major
//! ```
//!
//! Extra header keys are kept as metadata (the context module reads
//! `pool_kernel` from there).

use panoptic_core::tensor::{ConvWeights, MiniDlWeights, MINIDL_POOL_KERNEL};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    tensors: Vec<TensorInfo>,
    #[serde(flatten)]
    metadata: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub tensors: Vec<Tensor>,
    pub metadata: Map<String, Value>,
}

impl Container {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn read(bytes: &[u8], context: &str) -> Result<Self> {
        let bad = |m: &str| Error::schema(context, m);
        let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?.try_into().unwrap();
        let n = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| bad("header length overflows"))?;
        let header_end = 8usize.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[8..header_end]).map_err(|e| Error::json(context, e))?;

        let mut data = &bytes[header_end..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for info in header.tensors {
            let count = info
                .shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| bad("tensor size overflows"))?;
            let size = count.checked_mul(4).ok_or_else(|| bad("tensor size overflows"))?;
            if data.len() < size {
                return Err(Error::schema(context, format!("tensor {} is truncated", info.name)));
            }
            let (chunk, rest) = data.split_at(size);
            data = rest;
            tensors.push(Tensor {
                name: info.name,
                shape: info.shape,
                data: chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect(),
            });
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after the last tensor"));
        }
        Ok(Self {
            tensors,
            metadata: header.metadata,
        })
    }

    pub fn write(&self) -> Vec<u8> {
        let header = Header {
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorInfo {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

fn conv(c: &Container, name: &'static str, context: &str) -> Result<ConvWeights> {
    let t = c
        .get(name)
        .ok_or_else(|| Error::schema(context, format!("missing tensor {name}")))?;
    let [o, i, kh, kw]: [usize; 4] = t
        .shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::schema(context, format!("{name} must be 4-dimensional")))?;
    ConvWeights::new(o, i, kh, kw, t.data.iter().map(|&v| f64::from(v)).collect())
        .map_err(|e| Error::schema(context, format!("{name}: {e}")))
}

/// Loads the context module from tensors `dilated1`, `dilated6`,
/// `pool_projection` and `fuse`, with optional `pool_kernel` metadata.
pub fn load_minidl(c: &Container, in_channels: usize, context: &str) -> Result<MiniDlWeights> {
    let pool_kernel = match c.metadata.get("pool_kernel") {
        None => MINIDL_POOL_KERNEL,
        Some(v) => v
            .as_u64()
            .and_then(|k| usize::try_from(k).ok())
            .ok_or_else(|| Error::schema(context, "pool_kernel must be a positive integer"))?,
    };
    let w = MiniDlWeights {
        dilated1: conv(c, "dilated1", context)?,
        dilated6: conv(c, "dilated6", context)?,
        pool_projection: conv(c, "pool_projection", context)?,
        fuse: conv(c, "fuse", context)?,
        pool_kernel,
    };
    w.validate(in_channels).map_err(|e| Error::schema(context, e))?;
    Ok(w)
}
