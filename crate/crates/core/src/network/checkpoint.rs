//! Binary checkpoint format.
//!
//! ```text
//! "TSXN" | version: u32 LE | header length: u32 LE | header JSON | payload
//! ```
//!
//! The payload is every tensor in declaration order as little-endian `f64`,
//! row-major. The header carries the architecture, tensor shapes, training
//! metadata and the CRC-32 of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, FeatureThresholds, Network, Params, TrainingMeta};
use crate::error::{CheckpointError, Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TSXN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: Architecture,
    tensors: Vec<TensorInfo>,
    training_meta: TrainingMeta,
    channel_schema: Vec<String>,
    thresholds: FeatureThresholds,
    payload_crc32: u32,
}

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(8 * self.param_count());
        for v in self.params.values() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let header = Header {
            architecture: self.architecture.clone(),
            tensors: self
                .architecture
                .tensor_shapes()
                .into_iter()
                .map(|(name, shape)| TensorInfo { name, shape })
                .collect(),
            training_meta: self.training_meta.clone(),
            channel_schema: self.channel_schema.clone(),
            thresholds: self.thresholds.clone(),
            payload_crc32: crc32fast::hash(&payload),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        let truncated = |what: &str| CheckpointError::Truncated(what.to_string());
        if bytes.len() < 4 {
            return Err(truncated("magic").into());
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::Magic.into());
        }
        let word = |at: usize, what: &str| -> Result<u32> {
            let b = bytes.get(at..at + 4).ok_or_else(|| truncated(what))?;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
        };
        let version = word(4, "version")?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            }
            .into());
        }
        let header_len = word(8, "header length")? as usize;
        let header_bytes = bytes
            .get(12..12usize.saturating_add(header_len))
            .ok_or_else(|| truncated("header"))?;
        let header: Header = serde_json::from_slice(header_bytes)
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let arch = header.architecture;
        arch.validate()
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let shapes = arch.tensor_shapes();
        let declared_ok = shapes.len() == header.tensors.len()
            && shapes
                .iter()
                .zip(&header.tensors)
                .all(|((n, s), t)| *n == t.name && *s == t.shape);
        if !declared_ok {
            return Err(CheckpointError::Header(
                "tensor table does not match the architecture".into(),
            )
            .into());
        }

        let payload = &bytes[12 + header_len..];
        let expected_len = 8 * arch.param_count();
        if payload.len() < expected_len {
            return Err(truncated("payload").into());
        }
        if payload.len() > expected_len {
            return Err(CheckpointError::Header(format!(
                "{} trailing bytes after payload",
                payload.len() - expected_len
            ))
            .into());
        }
        let crc = crc32fast::hash(payload);
        if crc != header.payload_crc32 {
            return Err(CheckpointError::Checksum {
                expected: header.payload_crc32,
                found: crc,
            }
            .into());
        }

        let mut params = Params::zeros(&arch);
        let mut chunks = payload.chunks_exact(8);
        for tensor in params.tensors_mut() {
            for v in tensor.iter_mut() {
                let b = chunks.next().expect("payload length checked");
                *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            }
        }
        if params.values().any(|v| !v.is_finite()) {
            return Err(CheckpointError::Header("non-finite parameter".into()).into());
        }
        Ok(Network {
            architecture: arch,
            params,
            training_meta: header.training_meta,
            channel_schema: header.channel_schema,
            thresholds: header.thresholds,
        })
    }
}

pub fn save(network: &Network, path: &Path) -> Result<()> {
    fs::write(path, network.to_bytes())?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(Error::Io)?;
    Network::from_bytes(&bytes)
}
