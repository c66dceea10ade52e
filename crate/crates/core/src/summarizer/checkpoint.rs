//! Binary checkpoint container plus JSON sidecar.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "CMSEQ2SQ"
//! version      u32      1
//! n_tensors    u32
//! per tensor:  u32 name length, UTF-8 name, u32 rank, rank × u64 dims
//! n_values     u64      total parameter count
//! values       n_values × f32, tensors in table order, row-major
//! ```
//!
//! The sidecar (`<file>.json`) records dimensions, vocabulary sizes and
//! hashes, the training config and the SHA-256 of the binary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::{sha256_hex, write_bytes};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::model::{ModelDims, Seq2SeqModel, TensorSpec};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CMSEQ2SQ";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub dims: ModelDims,
    pub v_src: usize,
    pub v_tgt: usize,
    pub n_params: usize,
    pub src_vocab_hash: String,
    pub tgt_vocab_hash: String,
    pub train_config: serde_json::Value,
    pub binary_sha256: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_checkpoint<T: Real>(model: &Seq2SeqModel<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.n_params() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.tensors().len() as u32).to_le_bytes());
    for t in model.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    out.extend_from_slice(&(model.n_params() as u64).to_le_bytes());
    for &p in &model.params {
        out.extend_from_slice(&(p.as_f64() as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint, checking its tensor table against the layout implied
/// by `dims` and the vocabulary sizes.
pub fn decode_checkpoint(bytes: &[u8], dims: ModelDims, v_src: usize, v_tgt: usize) -> Result<Seq2SeqModel<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a seq2seq checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = r.u32()? as usize;
    let mut table = Vec::with_capacity(n);
    let mut offset = 0;
    for _ in 0..n {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let spec = TensorSpec { name, shape, offset };
        offset += spec.len();
        table.push(spec);
    }
    let total = r.u64()? as usize;
    let data = r.take(total * 4)?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint data".into()));
    }
    let params: Vec<f32> = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let model = Seq2SeqModel::from_params(v_src, v_tgt, dims, params)?;
    if model.tensors() != table.as_slice() {
        return Err(Error::Format("checkpoint tensor table does not match the model layout".into()));
    }
    Ok(model)
}

/// Writes the binary checkpoint and its sidecar; returns the sidecar.
pub fn save_checkpoint<T: Real>(
    model: &Seq2SeqModel<T>,
    path: &Path,
    src_vocab_hash: &str,
    tgt_vocab_hash: &str,
    train_config: serde_json::Value,
) -> Result<CheckpointMeta> {
    let bytes = encode_checkpoint(model);
    write_bytes(path, &bytes)?;
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        dims: model.dims,
        v_src: model.v_src,
        v_tgt: model.v_tgt,
        n_params: model.n_params(),
        src_vocab_hash: src_vocab_hash.to_string(),
        tgt_vocab_hash: tgt_vocab_hash.to_string(),
        train_config,
        binary_sha256: sha256_hex(&bytes),
    };
    let mut side = serde_json::to_vec_pretty(&meta)?;
    side.push(b'\n');
    write_bytes(&sidecar_path(path), &side)?;
    Ok(meta)
}

pub fn load_checkpoint(path: &Path) -> Result<(Seq2SeqModel<f32>, CheckpointMeta)> {
    let side = sidecar_path(path);
    let meta: CheckpointMeta = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if sha256_hex(&bytes) != meta.binary_sha256 {
        return Err(Error::Format(format!("{}: checkpoint hash does not match its sidecar", path.display())));
    }
    let model = decode_checkpoint(&bytes, meta.dims, meta.v_src, meta.v_tgt)?;
    Ok((model, meta))
}
