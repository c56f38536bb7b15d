//! `track`: speckle tracking over consecutive reconstructed frames.

use std::path::{Path, PathBuf};

use dwecho::io::{load_field, read_json, save_field};
use dwecho::track::{track_sequence, TrackConfig};
use dwecho::MotionField;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{create_dir, write_manifest};
use crate::error::{data, Result};
use crate::reconstruct::{Method, Reconstruction};

pub const TRACK_FORMAT: &str = "dwecho-tracking";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSequence {
    pub name: String,
    /// `fields[k]` links frame `k` to frame `k + 1`.
    pub fields: Vec<String>,
    pub frame_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackManifest {
    pub format: String,
    pub method: Method,
    pub simulation_hash: String,
    pub track: TrackConfig,
    pub sequences: Vec<TrackSequence>,
}

#[derive(Debug, Clone)]
pub struct Tracking {
    pub dir: PathBuf,
    pub manifest: TrackManifest,
}

impl Tracking {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("tracking.json");
        if !path.is_file() {
            return Err(data(format!("{} has no tracking.json", dir.display())));
        }
        let manifest: TrackManifest =
            read_json(&path).map_err(|e| data(format!("corrupt tracking manifest: {e}")))?;
        if manifest.format != TRACK_FORMAT {
            return Err(data(format!("{} is not a tracking result", dir.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn sequence(&self, name: &str) -> Option<&TrackSequence> {
        self.manifest.sequences.iter().find(|s| s.name == name)
    }

    pub fn load_fields(&self, name: &str) -> Result<Vec<MotionField>> {
        let s = self
            .sequence(name)
            .ok_or_else(|| data(format!("tracking has no sequence {name}")))?;
        s.fields
            .iter()
            .map(|f| Ok(load_field(&self.dir.join(&s.name).join(f))?))
            .collect()
    }
}

pub fn track_name(k: usize) -> String {
    format!("track_{k:04}")
}

/// Tracks every sequence of the reconstruction in `recon_dir` into `out`.
pub fn cmd_track(cfg: &ExperimentConfig, recon_dir: &Path, out: &Path) -> Result<TrackManifest> {
    cfg.track.validate().map_err(|e| crate::error::CliError::Config(e.to_string()))?;
    let recon = Reconstruction::open(recon_dir)?;
    create_dir(out)?;
    let mut sequences = Vec::with_capacity(recon.manifest.sequences.len());
    for (k, seq) in recon.manifest.sequences.iter().enumerate() {
        if seq.frames.len() < 2 {
            return Err(data(format!("{} has fewer than two frames", seq.name)));
        }
        let frames = recon.load_sequence(k)?;
        let fields = track_sequence(&frames, &cfg.track)?;
        let mut names = Vec::with_capacity(fields.len());
        for (p, field) in fields.iter().enumerate() {
            let stem = track_name(p);
            save_field(&out.join(&seq.name).join(&stem), field)?;
            names.push(stem);
        }
        log::info!("{} tracked over {} pairs", seq.name, fields.len());
        sequences.push(TrackSequence {
            name: seq.name.clone(),
            fields: names,
            frame_times: seq.frame_times.clone(),
        });
    }
    let manifest = TrackManifest {
        format: TRACK_FORMAT.into(),
        method: recon.manifest.method,
        simulation_hash: recon.manifest.simulation_hash.clone(),
        track: cfg.track.clone(),
        sequences,
    };
    write_manifest(&out.join("tracking.json"), &manifest)?;
    Ok(manifest)
}
