//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! "MEMEFORGE-CKPT\n"  u32 version  u8 kind
//! u32 header_len  header_len bytes of JSON {kind, config, meta}
//! u32 tensor_count
//! per tensor: u16 name_len, name, u8 ndim, ndim x u32 dims, f64 data
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::expected_shapes;
use super::{FusionModelConfig, Model, ModelKind, ModelParams, NnError, Param, Result, Tensor};

const MAGIC: &[u8] = b"MEMEFORGE-CKPT\n";
const VERSION: u32 = 1;

/// A model plus free-form metadata describing how its inputs were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    config: FusionModelConfig,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let m = &ckpt.model;
    let header = serde_json::to_vec(&Header { kind: m.kind, config: m.config.clone(), meta: ckpt.meta.clone() })
        .expect("header serialises");
    let mut out = Vec::with_capacity(m.params.scalar_count() * 8 + header.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(m.kind.code());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(m.params.len() as u32).to_le_bytes());
    for p in m.params.iter() {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.value.shape().len() as u8);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn corrupt(msg: impl Into<String>) -> NnError {
    NnError::CorruptCheckpoint(msg.into())
}

/// Parses a checkpoint. With `expected` set, a checkpoint of any other kind
/// is rejected.
pub fn checkpoint_from_bytes(bytes: &[u8], expected: Option<ModelKind>) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let code = r.u8("kind")?;
    let kind = ModelKind::from_code(code).ok_or_else(|| corrupt(format!("unknown model kind code {code}")))?;
    if let Some(want) = expected {
        if want != kind {
            return Err(corrupt(format!("kind mismatch: file holds {}, expected {}", kind.as_str(), want.as_str())));
        }
    }
    let hlen = r.u32("header length")? as usize;
    let header: Header =
        serde_json::from_slice(r.take(hlen, "header")?).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if header.kind != kind {
        return Err(corrupt("header kind disagrees with the kind byte"));
    }
    let layout = expected_shapes(kind, &header.config).map_err(|e| corrupt(format!("header config: {e}")))?;
    let count = r.u32("tensor count")? as usize;
    if count != layout.len() {
        return Err(corrupt(format!("expected {} tensors, found {count}", layout.len())));
    }
    let mut params = Vec::with_capacity(count);
    for (want_name, want_shape) in layout {
        let nlen = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(nlen, "name")?).map_err(|_| corrupt("tensor name is not utf-8"))?;
        if name != want_name {
            return Err(corrupt(format!("expected tensor {want_name}, found {name}")));
        }
        let ndim = r.u8("rank")? as usize;
        let shape = (0..ndim).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape != want_shape {
            return Err(corrupt(format!("tensor {name} has shape {shape:?}, expected {want_shape:?}")));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(8).ok_or_else(|| corrupt("tensor too large"))?, "tensor data")?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        params.push(Param { name: name.to_string(), value: Tensor::from_vec(&shape, data)? });
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { model: Model { kind, config: header.config, params: ModelParams::new(params) }, meta: header.meta })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(ckpt)).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path, expected: Option<ModelKind>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
    checkpoint_from_bytes(&bytes, expected)
}
