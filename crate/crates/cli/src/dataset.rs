//! On-disk dataset layout.
//!
//! ```text
//! dataset.json
//! seq_000/sequence.json
//! seq_000/frame_0000/manifest.json
//! seq_000/frame_0000/input_{0,1,2}.{json,bin}   beamformed input transmits
//! seq_000/frame_0000/reference.{json,bin}       frozen-time compound
//! seq_000/motion_0000.{json,bin}                true motion, frame 0 -> 1
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dwecho::beamform::DASConfig;
use dwecho::io::{load_iq, read_json, write_json};
use dwecho::sim::{DiskPhantom, MotionModel};
use dwecho::track::{TrackConfig, WindowLattice};
use dwecho::{IQImage, ProbeConfig, ScanGrid, TransmitScheme};
use serde::{Deserialize, Serialize};

use crate::error::{data, Result};

pub const DATASET_FORMAT: &str = "dwecho-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    All,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            other => Err(format!("unknown split {other:?} (train, val, test, all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub simulation_hash: String,
    pub seed: u64,
    /// `templates` or `disk`.
    pub scene_kind: String,
    pub probe: ProbeConfig,
    pub input_scheme: TransmitScheme,
    pub reference_scheme: TransmitScheme,
    pub das: DASConfig,
    pub frame_interval: f64,
    pub frames_per_sequence: usize,
    pub sequences: Vec<String>,
    pub splits: Splits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TemplateInfo {
    File { path: String, sha256: String, width: usize, height: usize },
    Synthetic { seed: u64, size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub name: String,
    pub grid: ScanGrid,
    pub motion: MotionModel,
    /// Set for rigid rotations (rad/s).
    pub angular_velocity: Option<f64>,
    pub rotation_center: Option<[f64; 2]>,
    pub template: Option<TemplateInfo>,
    pub phantom: Option<DiskPhantom>,
    /// Top-left node of the patch inside the parent grid.
    pub patch_origin: Option<[usize; 2]>,
    pub medium_seed: u64,
    pub scatterers: usize,
    pub frame_interval: f64,
    pub frame_times: Vec<f64>,
    pub frames: Vec<String>,
    /// `ground_truth[k]` links frame `k` to frame `k + 1`.
    pub ground_truth: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub frame_time: f64,
    pub inputs: Vec<String>,
    /// Firing time of each input transmit (s).
    pub input_times: Vec<f64>,
    pub reference: Option<String>,
    pub reference_transmits: usize,
}

pub fn sequence_name(k: usize) -> String {
    format!("seq_{k:03}")
}

pub fn frame_name(k: usize) -> String {
    format!("frame_{k:04}")
}

pub fn motion_name(k: usize) -> String {
    format!("motion_{k:04}")
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| data(format!("cannot create {}: {e}", path.display())))
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub sequences: Vec<SequenceManifest>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("dataset.json");
        if !path.is_file() {
            return Err(data(format!("{} has no dataset.json", dir.display())));
        }
        let manifest: DatasetManifest =
            read_json(&path).map_err(|e| data(format!("corrupt dataset manifest: {e}")))?;
        if manifest.format != DATASET_FORMAT || manifest.version != DATASET_VERSION {
            return Err(data(format!(
                "{} is not a version {DATASET_VERSION} dataset",
                path.display()
            )));
        }
        let sequences = manifest
            .sequences
            .iter()
            .map(|name| {
                let seq: SequenceManifest = read_json(&dir.join(name).join("sequence.json"))
                    .map_err(|e| data(format!("corrupt sequence manifest {name}: {e}")))?;
                if seq.frames.len() != seq.frame_times.len() {
                    return Err(data(format!("sequence {name}: frame list and times differ")));
                }
                Ok(seq)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = sequences.len();
        let s = &manifest.splits;
        if s.train.iter().chain(&s.val).chain(&s.test).any(|&k| k >= n) {
            return Err(data("split refers to a missing sequence"));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            sequences,
        })
    }

    pub fn split(&self, split: Split) -> Vec<usize> {
        let s = &self.manifest.splits;
        match split {
            Split::Train => s.train.clone(),
            Split::Val => s.val.clone(),
            Split::Test => s.test.clone(),
            Split::All => (0..self.sequences.len()).collect(),
        }
    }

    pub fn sequence_index(&self, name: &str) -> Option<usize> {
        self.sequences.iter().position(|s| s.name == name)
    }

    fn frame_dir(&self, seq: usize, frame: usize) -> PathBuf {
        let s = &self.sequences[seq];
        self.dir.join(&s.name).join(&s.frames[frame])
    }

    pub fn frame_manifest(&self, seq: usize, frame: usize) -> Result<FrameManifest> {
        read_json(&self.frame_dir(seq, frame).join("manifest.json"))
            .map_err(|e| data(format!("corrupt frame manifest: {e}")))
    }

    pub fn load_inputs(&self, seq: usize, frame: usize) -> Result<Vec<IQImage>> {
        let dir = self.frame_dir(seq, frame);
        let m = self.frame_manifest(seq, frame)?;
        m.inputs.iter().map(|stem| Ok(load_iq(&dir.join(stem))?)).collect()
    }

    /// Errors when the frame was stored without its frozen-time stack.
    pub fn load_reference(&self, seq: usize, frame: usize) -> Result<IQImage> {
        let dir = self.frame_dir(seq, frame);
        let m = self.frame_manifest(seq, frame)?;
        let stem = m.reference.ok_or_else(|| {
            data(format!(
                "{} frame {frame} has no frozen-time reference",
                self.sequences[seq].name
            ))
        })?;
        if !dir.join(format!("{stem}.bin")).is_file() {
            return Err(data(format!("missing reference stack in {}", dir.display())));
        }
        Ok(load_iq(&dir.join(stem))?)
    }

    pub fn ground_truth_path(&self, seq: usize, pair: usize) -> PathBuf {
        let s = &self.sequences[seq];
        self.dir.join(&s.name).join(&s.ground_truth[pair])
    }
}

pub fn write_manifest<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(write_json(path, value)?)
}

/// Window centres of the finest tracking level that fits on `grid`, in
/// Cartesian metres; the tracker reports its vectors at these points.
pub fn tracking_points(grid: &ScanGrid, track: &TrackConfig) -> Vec<[f64; 2]> {
    let (rows, cols) = grid.shape();
    let lattice = track
        .window_sizes
        .iter()
        .filter_map(|&w| WindowLattice::new(rows, cols, w, track.step(w)))
        .last();
    match lattice {
        None => Vec::new(),
        Some(l) => (0..l.len())
            .map(|k| {
                let (cy, cx) = l.center(k);
                grid.fractional_to_cartesian(cy, cx)
            })
            .collect(),
    }
}
