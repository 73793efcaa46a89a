//! Binary checkpoint container: an 8-byte magic, a little-endian `u32`
//! version, a `u64` header length, a JSON header, then every tensor as
//! little-endian `f64` in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::MetricsRecord;
use crate::error::{Error, Result};
use crate::numerics::RngState;
use crate::optim::Optimizer;

use super::config::TrainConfig;
use super::model::Model;

pub const MAGIC: &[u8; 8] = b"SQDRCK01";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    /// Epochs completed.
    epoch: usize,
    rng: RngState,
    optimizer_step: u64,
    optimizer_epoch: u64,
    metrics: Vec<MetricsRecord>,
    tensors: Vec<TensorEntry>,
}

/// Everything needed to resume or evaluate a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub rng: RngState,
    /// Step counters only; the moment estimates live in `tensors`.
    pub optimizer: Optimizer,
    pub metrics: Vec<MetricsRecord>,
    pub tensors: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn capture(
        config: &TrainConfig,
        epoch: usize,
        rng: RngState,
        model: &Model,
        optimizer: &Optimizer,
        metrics: &[MetricsRecord],
    ) -> Self {
        let mut tensors: Vec<(String, Vec<f64>)> = model.named_tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
        for (k, (m, v)) in optimizer.m.iter().zip(&optimizer.v).enumerate() {
            tensors.push((format!("optim.m.{k}"), m.clone()));
            tensors.push((format!("optim.v.{k}"), v.clone()));
        }
        let mut opt = optimizer.clone();
        opt.m.clear();
        opt.v.clear();
        Self {
            config: config.clone(),
            epoch,
            rng,
            optimizer: opt,
            metrics: metrics.to_vec(),
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            epoch: self.epoch,
            rng: self.rng.clone(),
            optimizer_step: self.optimizer.step,
            optimizer_epoch: self.optimizer.epoch,
            metrics: self.metrics.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    len: t.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * self.tensors.iter().map(|t| t.1.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Compatibility(format!("checkpoint version {version}, expected {VERSION}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(Error::Length {
                expected: 20 + hlen,
                found: bytes.len(),
            });
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Format(e.to_string()))?;
        let payload = &body[hlen..];
        let total: usize = header.tensors.iter().map(|t| t.len).sum();
        if payload.len() != 8 * total {
            return Err(Error::Length {
                expected: 20 + hlen + 8 * total,
                found: bytes.len(),
            });
        }
        let mut words = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let tensors = header
            .tensors
            .iter()
            .map(|e| (e.name.clone(), words.by_ref().take(e.len).collect()))
            .collect();
        let mut optimizer = Optimizer::new(header.config.optimizer);
        optimizer.step = header.optimizer_step;
        optimizer.epoch = header.optimizer_epoch;
        Ok(Self {
            config: header.config,
            epoch: header.epoch,
            rng: header.rng,
            optimizer,
            metrics: header.metrics,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Optimizer with its moment estimates restored.
    pub fn optimizer(&self) -> Optimizer {
        let mut opt = self.optimizer.clone();
        for (name, t) in &self.tensors {
            if name.starts_with("optim.m.") {
                opt.m.push(t.clone());
            } else if name.starts_with("optim.v.") {
                opt.v.push(t.clone());
            }
        }
        opt
    }

    /// Copies the stored weights into `model`, which must have the same
    /// tensor names and shapes.
    pub fn restore(&self, model: &mut Model) -> Result<()> {
        let stored: Vec<&(String, Vec<f64>)> = self.tensors.iter().filter(|(n, _)| !n.starts_with("optim.")).collect();
        let mut targets = model.named_tensors_mut();
        if stored.len() != targets.len() {
            return Err(Error::Compatibility(format!(
                "checkpoint holds {} tensors, model has {}",
                stored.len(),
                targets.len()
            )));
        }
        for ((name, t), (tname, target)) in stored.into_iter().zip(targets.iter_mut()) {
            if name != tname || t.len() != target.len() {
                return Err(Error::Compatibility(format!(
                    "tensor `{name}` ({}) does not match `{tname}` ({})",
                    t.len(),
                    target.len()
                )));
            }
            target.copy_from_slice(t);
        }
        Ok(())
    }
}
