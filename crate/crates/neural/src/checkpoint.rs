//! Checkpoint file layout:
//!
//! ```text
//! 8 bytes   magic "TDEKCKPT"
//! 8 bytes   header length H (u64, little endian)
//! H bytes   JSON header (schema version, model config, metadata,
//!           optimizer settings, tensor directory)
//! ...       tensor data, f32 little endian, at the offsets listed in the
//!           directory (relative to the end of the header)
//! ```
//!
//! Optimizer moments are stored as tensors named `adam.m.<param>` and
//! `adam.v.<param>`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::optim::{AdamW, AdamWConfig};
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TDEKCKPT";

/// Provenance recorded with a trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub dataset_manifest_hash: String,
    pub dataset_master_seed: u64,
    pub dataset_config_hash: String,
    pub train_config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerHeader {
    config: AdamWConfig,
    step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    model: ModelConfig,
    metadata: TrainingMetadata,
    optimizer: Option<OptimizerHeader>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optimizer: Option<AdamW<f32>>,
    pub metadata: TrainingMetadata,
}

fn fmt_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut blob: Vec<u8> = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, data: &[f32]| {
            tensors.push(TensorEntry {
                name,
                shape,
                offset: blob.len() as u64,
                len: data.len() as u64,
            });
            for v in data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        };
        for (name, p) in self.model.names.iter().zip(&self.model.params) {
            push(name.clone(), p.shape().to_vec(), p.data());
        }
        if let Some(opt) = &self.optimizer {
            for (i, name) in self.model.names.iter().enumerate() {
                let shape = self.model.params[i].shape().to_vec();
                push(format!("adam.m.{name}"), shape.clone(), &opt.m[i]);
                push(format!("adam.v.{name}"), shape, &opt.v[i]);
            }
        }
        let header = Header {
            schema_version: CHECKPOINT_VERSION,
            model: self.model.config.clone(),
            metadata: self.metadata.clone(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerHeader {
                config: o.config,
                step: o.step,
            }),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + json.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(fmt_err(path, "not a checkpoint (bad magic)"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16usize.saturating_add(hlen))
            .ok_or_else(|| fmt_err(path, "truncated header"))?;
        let value: serde_json::Value =
            serde_json::from_slice(body).map_err(|e| fmt_err(path, format!("header JSON: {e}")))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != CHECKPOINT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found.min(u32::MAX as u64) as u32,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header: Header = serde_json::from_value(value).map_err(|e| fmt_err(path, format!("header: {e}")))?;
        let blob = &bytes[16 + hlen..];
        let read = |e: &TensorEntry| -> Result<Tensor<f32>> {
            let start = e.offset as usize;
            let end = start + 4 * e.len as usize;
            let raw = blob
                .get(start..end)
                .ok_or_else(|| fmt_err(path, format!("tensor {} extends past end of file", e.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            Tensor::new(e.shape.clone(), data).map_err(|err| fmt_err(path, format!("tensor {}: {err}", e.name)))
        };
        let (adam, params): (Vec<&TensorEntry>, Vec<&TensorEntry>) =
            header.tensors.iter().partition(|e| e.name.starts_with("adam."));
        let names: Vec<String> = params.iter().map(|e| e.name.clone()).collect();
        let tensors = params.iter().map(|e| read(e)).collect::<Result<Vec<_>>>()?;
        let model = Model::from_parts(header.model.clone(), names.clone(), tensors)?;
        let optimizer = match header.optimizer {
            None => None,
            Some(oh) => {
                let find = |prefix: &str, name: &str| -> Result<Vec<f32>> {
                    let full = format!("adam.{prefix}.{name}");
                    let e = adam
                        .iter()
                        .find(|e| e.name == full)
                        .ok_or_else(|| fmt_err(path, format!("missing optimizer tensor {full}")))?;
                    Ok(read(e)?.into_data())
                };
                let m = names.iter().map(|n| find("m", n)).collect::<Result<Vec<_>>>()?;
                let v = names.iter().map(|n| find("v", n)).collect::<Result<Vec<_>>>()?;
                Some(AdamW {
                    config: oh.config,
                    step: oh.step,
                    m,
                    v,
                })
            }
        };
        Ok(Self {
            model,
            optimizer,
            metadata: header.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes, path)
    }
}
