//! `reconstruct`: one I/Q sequence per dataset sequence and method.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dwecho::beamform::compound;
use dwecho::io::{load_iq, read_json, save_iq};
use dwecho::net::{load_checkpoint, reconstruct};
use dwecho::IQImage;
use serde::{Deserialize, Serialize};

use crate::config::{file_sha256, ExperimentConfig};
use crate::dataset::{create_dir, frame_name, write_manifest, Dataset, Split};
use crate::error::{data, CliError, Result};
use crate::train::check_dataset;

pub const RECON_FORMAT: &str = "dwecho-reconstruction";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Network output from the input transmits.
    Cnn,
    /// Coherent mean of the input transmits.
    Compound3,
    /// The stored frozen-time compound.
    CompoundRef,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cnn => "cnn",
            Method::Compound3 => "compound3",
            Method::CompoundRef => "compound_ref",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(Method::Cnn),
            "compound3" => Ok(Method::Compound3),
            "compound_ref" => Ok(Method::CompoundRef),
            other => Err(format!("unknown method {other:?} (cnn, compound3, compound_ref)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSequence {
    pub name: String,
    pub frames: Vec<String>,
    pub frame_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconManifest {
    pub format: String,
    pub method: Method,
    pub simulation_hash: String,
    pub checkpoint_sha256: Option<String>,
    pub split: Split,
    pub sequences: Vec<ReconSequence>,
}

/// An opened reconstruction directory.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub dir: PathBuf,
    pub manifest: ReconManifest,
}

impl Reconstruction {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("reconstruction.json");
        if !path.is_file() {
            return Err(data(format!("{} has no reconstruction.json", dir.display())));
        }
        let manifest: ReconManifest =
            read_json(&path).map_err(|e| data(format!("corrupt reconstruction manifest: {e}")))?;
        if manifest.format != RECON_FORMAT {
            return Err(data(format!("{} is not a reconstruction", dir.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn load_sequence(&self, index: usize) -> Result<Vec<IQImage>> {
        let s = &self.manifest.sequences[index];
        s.frames
            .iter()
            .map(|f| Ok(load_iq(&self.dir.join(&s.name).join(f))?))
            .collect()
    }
}

/// Reconstructs every frame of the sequences in `split` into `out`.
pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    dataset_dir: &Path,
    method: Method,
    checkpoint: Option<&Path>,
    split: Split,
    out: &Path,
) -> Result<ReconManifest> {
    let dataset = Dataset::open(dataset_dir)?;
    check_dataset(cfg, &dataset)?;
    let net = match (method, checkpoint) {
        (Method::Cnn, None) => return Err(CliError::Config("method cnn needs --checkpoint".into())),
        (Method::Cnn, Some(path)) => Some(load_checkpoint(path)?.net),
        _ => None,
    };
    let checkpoint_sha256 = match (method, checkpoint) {
        (Method::Cnn, Some(path)) => Some(file_sha256(path)?),
        _ => None,
    };
    let indices = dataset.split(split);
    if indices.is_empty() {
        return Err(data(format!("split {} is empty", split.as_str())));
    }
    create_dir(out)?;
    let mut sequences = Vec::with_capacity(indices.len());
    for s in indices {
        let seq = &dataset.sequences[s];
        let mut frames = Vec::with_capacity(seq.frames.len());
        let mut times = Vec::with_capacity(seq.frames.len());
        for f in 0..seq.frames.len() {
            let image = match method {
                Method::CompoundRef => dataset.load_reference(s, f)?,
                Method::Compound3 => compound(&dataset.load_inputs(s, f)?)?,
                Method::Cnn => {
                    let inputs = dataset.load_inputs(s, f)?;
                    let refs: Vec<&IQImage> = inputs.iter().collect();
                    reconstruct(net.as_ref().expect("network loaded"), &refs)?
                }
            };
            let stem = frame_name(f);
            save_iq(&out.join(&seq.name).join(&stem), &image)?;
            frames.push(stem);
            times.push(image.frame_time);
        }
        log::info!("{} reconstructed with {}", seq.name, method.as_str());
        sequences.push(ReconSequence {
            name: seq.name.clone(),
            frames,
            frame_times: times,
        });
    }
    let manifest = ReconManifest {
        format: RECON_FORMAT.into(),
        method,
        simulation_hash: dataset.manifest.simulation_hash.clone(),
        checkpoint_sha256,
        split,
        sequences,
    };
    write_manifest(&out.join("reconstruction.json"), &manifest)?;
    Ok(manifest)
}
