//! Checkpoint container: `KDCK` magic, u32 format version, u32 header
//! length, JSON header, then the weights as little-endian f64.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"KDCK";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub train_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub epoch: usize,
    pub metrics: CheckpointMetrics,
    pub config_hash: String,
    pub weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    spec: ModelSpec,
    epoch: usize,
    metrics: CheckpointMetrics,
    config_hash: String,
    n_weights: usize,
    weights_sha256: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: self.spec.clone(),
            epoch: self.epoch,
            metrics: self.metrics,
            config_hash: self.config_hash.clone(),
            n_weights: self.weights.len(),
            weights_sha256: super::digest_weights(&self.weights),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + 8 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format {version}, expected {CHECKPOINT_FORMAT_VERSION}"
            )));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes
            .get(12..12 + hlen)
            .ok_or_else(|| Error::Format("truncated checkpoint header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        let raw = &bytes[12 + hlen..];
        if raw.len() != header.n_weights * 8 {
            return Err(Error::Format(format!(
                "checkpoint holds {} weight bytes, header says {} weights",
                raw.len(),
                header.n_weights
            )));
        }
        let weights: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if super::digest_weights(&weights) != header.weights_sha256 {
            return Err(Error::Format("checkpoint weight digest mismatch".into()));
        }
        Ok(Self {
            spec: header.spec,
            epoch: header.epoch,
            metrics: header.metrics,
            config_hash: header.config_hash,
            weights,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
