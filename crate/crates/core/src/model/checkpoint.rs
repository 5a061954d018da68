//! Binary checkpoint format.
//!
//! Layout (little endian): magic `RPTM`, format version `u32`, config JSON
//! (`u32` length + bytes), step `u64`, then three tensor blocks (parameters,
//! first and second Adam moments), then a SHA-256 digest of everything before
//! it. A tensor block is a `u32` count followed by, per tensor, its name
//! (`u32` length + bytes), rank `u32`, dims `u64` each and the `f64` data.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::params::Params;
use super::state::ModelState;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RPTM";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

fn write_block(out: &mut Vec<u8>, params: &Params) {
    let info = params.tensor_info();
    out.extend_from_slice(&(info.len() as u32).to_le_bytes());
    for (t, data) in info.iter().zip(params.slices()) {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn to_bytes(state: &ModelState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(&state.config).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&state.step.to_le_bytes());
    for block in [&state.params, &state.adam_m, &state.adam_v] {
        write_block(&mut out, block);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_block(c: &mut Cursor, target: &mut Params) -> Result<()> {
    let info = target.tensor_info();
    let count = c.u32()? as usize;
    if count != info.len() {
        return Err(Error::ShapeMismatch {
            name: "tensor count".into(),
            expected: vec![info.len()],
            found: vec![count],
        });
    }
    for (t, dst) in info.iter().zip(target.slices_mut()) {
        let len = c.u32()? as usize;
        let name = String::from_utf8_lossy(c.take(len)?).into_owned();
        if name != t.name {
            return Err(Error::Checkpoint(format!("expected tensor {}, found {name}", t.name)));
        }
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if shape != t.shape {
            return Err(Error::ShapeMismatch {
                name,
                expected: t.shape.clone(),
                found: shape,
            });
        }
        let raw = c.take(dst.len() * 8)?;
        for (v, b) in dst.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    Ok(())
}

fn read_header(data: &[u8]) -> Result<(ModelConfig, Cursor<'_>)> {
    if data.len() < MAGIC.len() + 4 + DIGEST_LEN || &data[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let (body, digest) = data.split_at(data.len() - DIGEST_LEN);
    let mut c = Cursor { data: body, pos: 4 };
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let len = c.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(len)?)?;
    config.validate()?;
    Ok((config, c))
}

pub fn from_bytes(data: &[u8]) -> Result<ModelState> {
    let (config, mut c) = read_header(data)?;
    let mut state = ModelState::new(config)?;
    state.step = c.u64()?;
    read_block(&mut c, &mut state.params)?;
    read_block(&mut c, &mut state.adam_m)?;
    read_block(&mut c, &mut state.adam_v)?;
    if c.pos != c.data.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", c.data.len() - c.pos)));
    }
    Ok(state)
}

/// Load the parameters of a checkpoint into a model of the given config.
/// Fails with [`Error::ShapeMismatch`] when the architectures differ.
pub fn load_params_into(data: &[u8], config: &ModelConfig) -> Result<ModelState> {
    let (_, mut c) = read_header(data)?;
    let mut state = ModelState::new(config.clone())?;
    c.u64()?;
    read_block(&mut c, &mut state.params)?;
    Ok(state)
}

/// Hex SHA-256 of a checkpoint file's bytes.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save(state: &ModelState, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(state))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelState> {
    from_bytes(&std::fs::read(path)?)
}
