//! Little-endian weight file:
//!
//! ```text
//! "PDDS" | version u32
//! fc1, fc2, fc3: rows u32 | cols u32 | rows·cols f32 (row-major) | bias_len u32 | bias_len f32
//! betas: 3 × f64
//! ```
//!
//! A JSON sidecar next to the weights records the encoder settings used in
//! training.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::encoder::EncoderConfig;
use super::lif::ResetMode;
use super::net::{Layer, SpikingNet};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"PDDS";
pub const WEIGHTS_VERSION: u32 = 1;

/// Largest dimension accepted when decoding.
const MAX_DIM: u32 = 1 << 16;

pub fn encode_weights(net: &SpikingNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + net.param_count() * 4 + 24);
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    for layer in &net.layers {
        out.extend_from_slice(&(layer.w.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.w.cols() as u32).to_le_bytes());
        for &w in layer.w.as_slice() {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out.extend_from_slice(&(layer.b.len() as u32).to_le_bytes());
        for &b in &layer.b {
            out.extend_from_slice(&(b as f32).to_le_bytes());
        }
    }
    for &beta in &net.betas {
        out.extend_from_slice(&beta.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::WeightFormat(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::WeightFormat(format!("{what} length overflows")))?;
        let raw = self.take(bytes, what)?;
        raw.chunks_exact(4)
            .map(|c| {
                let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
                if v.is_finite() {
                    Ok(v as f64)
                } else {
                    Err(Error::WeightFormat(format!("non-finite value in {what}")))
                }
            })
            .collect()
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

/// Decodes a weight file. Rejects bad magic, unknown versions, inconsistent
/// shapes, non-finite values and trailing bytes.
pub fn decode_weights(bytes: &[u8]) -> Result<SpikingNet> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::WeightFormat("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::WeightFormat(format!(
            "unsupported version {version}"
        )));
    }
    let mut layers = Vec::with_capacity(3);
    for name in ["fc1", "fc2", "fc3"] {
        let rows = c.u32(name)?;
        let cols = c.u32(name)?;
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::WeightFormat(format!(
                "{name} has implausible shape {rows}x{cols}"
            )));
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let w = c.f32s(rows * cols, name)?;
        let blen = c.u32(name)? as usize;
        if blen != rows {
            return Err(Error::WeightFormat(format!(
                "{name} bias length {blen} != rows {rows}"
            )));
        }
        let b = c.f32s(blen, name)?;
        layers.push(Layer {
            w: Matrix::from_vec(rows, cols, w),
            b,
        });
    }
    let mut betas = [0.0; 3];
    for beta in &mut betas {
        *beta = c.f64("betas")?;
        if !(0.0..=1.0).contains(beta) {
            return Err(Error::WeightFormat(format!("beta {beta} outside [0, 1]")));
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::WeightFormat(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    let layers: [Layer; 3] = layers.try_into().expect("three layers");
    let net = SpikingNet {
        layers,
        betas,
        reset: ResetMode::Subtract,
    };
    net.validate()
        .map_err(|e| Error::WeightFormat(e.to_string()))?;
    Ok(net)
}

/// Encoder and training settings stored beside a weight file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSidecar {
    pub timesteps: usize,
    pub noise_sigma: f64,
    pub axonal_delay: usize,
    pub seed: u64,
}

impl From<&EncoderConfig> for TrainingSidecar {
    fn from(e: &EncoderConfig) -> Self {
        Self {
            timesteps: e.timesteps,
            noise_sigma: e.noise_sigma,
            axonal_delay: e.axonal_delay,
            seed: e.seed,
        }
    }
}

impl TrainingSidecar {
    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            timesteps: self.timesteps,
            noise_sigma: self.noise_sigma,
            axonal_delay: self.axonal_delay,
            seed: self.seed,
        }
    }
}

/// `weights.bin` → `weights.bin.json`
pub fn sidecar_path(weights: &Path) -> PathBuf {
    let mut s = weights.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_weights_file(
    path: impl AsRef<Path>,
    net: &SpikingNet,
    sidecar: &TrainingSidecar,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(net)).map_err(|e| Error::file(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(sidecar)?;
    std::fs::write(&side, json).map_err(|e| Error::file(side, e))?;
    Ok(())
}

/// Reads weights and, if present, the sidecar.
pub fn read_weights_file(path: impl AsRef<Path>) -> Result<(SpikingNet, Option<TrainingSidecar>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    let net = decode_weights(&bytes)?;
    let side = sidecar_path(path);
    let sidecar = match std::fs::read(&side) {
        Ok(b) => Some(serde_json::from_slice(&b)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::file(side, e)),
    };
    Ok((net, sidecar))
}
