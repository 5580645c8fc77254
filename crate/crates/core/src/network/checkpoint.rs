//! `.msd` model files.
//!
//! Layout: the 8-byte magic `MSDNET01`, a little-endian `u32` header length,
//! the UTF-8 JSON header, then `n_params` little-endian `f32` values in the
//! network's flat parameter order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamConfig, MsdNetwork};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MSDNET01";

/// Free-form facts about how a model was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    #[serde(default)]
    pub stage: Option<usize>,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub final_train_loss: Option<f64>,
    #[serde(default)]
    pub final_val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub depth: usize,
    pub p: usize,
    pub seed: u64,
    pub n_params: usize,
    pub adam: AdamConfig,
    #[serde(default)]
    pub training: TrainingMeta,
}

pub fn write_checkpoint(
    path: &Path,
    net: &MsdNetwork<f32>,
    seed: u64,
    adam: AdamConfig,
    training: TrainingMeta,
) -> Result<()> {
    let header = CheckpointHeader {
        depth: net.depth(),
        p: net.dilation_modulus(),
        seed,
        n_params: net.n_params(),
        adam,
        training,
    };
    let json = serde_json::to_vec(&header).map_err(Error::json(path))?;
    let mut bytes = Vec::with_capacity(12 + json.len() + 4 * net.n_params());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for p in net.params() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, MsdNetwork<f32>)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing MSDNET01 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(Error::json(path))?;
    let raw = &bytes[12 + hlen..];
    if raw.len() != 4 * header.n_params {
        return Err(bad(&format!(
            "expected {} parameters, found {} bytes",
            header.n_params,
            raw.len()
        )));
    }
    let params = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let net = MsdNetwork::from_params(header.depth, header.p, params)?;
    Ok((header, net))
}
