//! Checkpoint container.
//!
//! ```text
//! b"DWCK" | u32 LE header length | JSON header | f32 LE blob
//! ```
//!
//! The blob holds, in order: the network parameters in
//! [`ComplexNetwork::parameters`] order, then, when the header says
//! `resume` is present, the current (last-epoch) parameters and Adam's first
//! and second moments, each of the same length.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ArchSpec, ComplexNetwork};
use super::train::{Adam, PlateauSchedule, TrainConfig, TrainHistory, TrainState};
use crate::io::{read_bytes, write_bytes};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DWCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeHeader {
    pub adam_step: u64,
    pub schedule: PlateauSchedule,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub arch: ArchSpec,
    pub width_multiplier: f64,
    pub train_config: Option<TrainConfig>,
    pub seed: u64,
    pub epoch: usize,
    pub best_val_loss: Option<f64>,
    /// Real values per parameter section.
    pub parameter_len: usize,
    pub dataset_hash: Option<String>,
    pub resume: Option<ResumeHeader>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub net: ComplexNetwork,
    /// Present when the file carries resume state.
    pub state: Option<TrainState>,
}

fn push_f32(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

pub fn encode_checkpoint(
    net: &ComplexNetwork,
    width_multiplier: f64,
    train_config: Option<&TrainConfig>,
    state: Option<&TrainState>,
    dataset_hash: Option<String>,
) -> Result<Vec<u8>> {
    let params = net.parameters();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        arch: net.arch.clone(),
        width_multiplier,
        train_config: train_config.cloned(),
        seed: train_config.map_or(0, |c| c.seed),
        epoch: state.map_or(0, |s| s.epoch),
        best_val_loss: state.map(|s| s.history.best_val_loss),
        parameter_len: params.len(),
        dataset_hash,
        resume: state.map(|s| ResumeHeader {
            adam_step: s.adam.step,
            schedule: s.schedule.clone(),
            history: s.history.clone(),
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + 4 * params.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    push_f32(&mut out, &params);
    if let Some(s) = state {
        push_f32(&mut out, &s.net.parameters());
        push_f32(&mut out, &s.adam.m);
        push_f32(&mut out, &s.adam.v);
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let hlen = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if bytes.len() < 8 + hlen {
        return Err(Error::format(path, "truncated header"));
    }
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[8..8 + hlen]).map_err(|e| Error::format(path, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {}", header.format_version)));
    }
    let blob = crate::io::decode_f32(&bytes[8 + hlen..], path)?;
    let n = header.parameter_len;
    let sections = if header.resume.is_some() { 4 } else { 1 };
    if blob.len() != sections * n {
        return Err(Error::format(path, format!("expected {} values, found {}", sections * n, blob.len())));
    }
    let mut net = ComplexNetwork::zeros(header.arch.clone()).map_err(|e| Error::format(path, e.to_string()))?;
    net.set_parameters(&blob[..n]).map_err(|e| Error::format(path, e.to_string()))?;
    let state = match &header.resume {
        None => None,
        Some(r) => {
            let mut current = net.clone();
            current.set_parameters(&blob[n..2 * n])?;
            let cfg = header.train_config.clone().unwrap_or_default();
            let mut adam = Adam::new(cfg.adam, n);
            adam.step = r.adam_step;
            adam.m = blob[2 * n..3 * n].to_vec();
            adam.v = blob[3 * n..].to_vec();
            Some(TrainState {
                net: current,
                best: net.clone(),
                adam,
                schedule: r.schedule.clone(),
                history: r.history.clone(),
                epoch: header.epoch,
            })
        }
    };
    Ok(Checkpoint { header, net, state })
}

pub fn save_checkpoint(
    path: &Path,
    net: &ComplexNetwork,
    width_multiplier: f64,
    train_config: Option<&TrainConfig>,
    state: Option<&TrainState>,
    dataset_hash: Option<String>,
) -> Result<()> {
    write_bytes(path, &encode_checkpoint(net, width_multiplier, train_config, state, dataset_hash)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?, path)
}
