//! Experiment configuration: one JSON document drives every command.

use std::path::{Path, PathBuf};

use dwecho::beamform::DASConfig;
use dwecho::eval::RegionSpec;
use dwecho::net::TrainConfig;
use dwecho::sim::{DiskPhantom, MediumParams, SimOptions};
use dwecho::track::TrackConfig;
use dwecho::{ProbeConfig, ScanGrid, TimingMode, TransmitScheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const OUTPUT_DIR_ENV: &str = "DWECHO_OUTPUT_DIR";
pub const THREADS_ENV: &str = "DWECHO_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream. Required.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Caps data parallelism; `None` lets the runtime decide.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    pub scene: SceneConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    /// `train.seed` is ignored; the training stream derives from `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub track: TrackConfig,
    #[serde(default)]
    pub das: DASConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub prf: f64,
    pub input_transmits: usize,
    pub reference_transmits: usize,
    pub steering_half_span_deg: f64,
    pub sim: SimOptions,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            prf: 4500.0,
            input_transmits: 3,
            reference_transmits: 31,
            steering_half_span_deg: 20.0,
            sim: SimOptions::default(),
        }
    }
}

impl AcquisitionConfig {
    pub fn input_scheme(&self) -> dwecho::Result<TransmitScheme> {
        TransmitScheme::evenly_spaced(
            self.input_transmits,
            self.steering_half_span_deg.to_radians(),
            self.prf,
            TimingMode::Dynamic,
        )
    }

    pub fn reference_scheme(&self) -> dwecho::Result<TransmitScheme> {
        TransmitScheme::evenly_spaced(
            self.reference_transmits,
            self.steering_half_span_deg.to_radians(),
            self.prf,
            TimingMode::FrozenTime,
        )
    }
}

/// Polar sector; unset sizes follow the half-wavelength rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub depth_range: [f64; 2],
    pub half_angle_deg: f64,
    pub n_depth: Option<usize>,
    pub n_angle: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            depth_range: [0.01, 0.10],
            half_angle_deg: 45.0,
            n_depth: None,
            n_angle: None,
        }
    }
}

impl GridConfig {
    pub fn resolve(&self, probe: &ProbeConfig) -> dwecho::Result<ScanGrid> {
        let depth = (self.depth_range[0], self.depth_range[1]);
        let half = self.half_angle_deg.to_radians();
        let auto = ScanGrid::half_wavelength(probe, depth, (-half, half))?;
        ScanGrid::new(
            depth,
            (-half, half),
            self.n_depth.unwrap_or(auto.n_depth),
            self.n_angle.unwrap_or(auto.n_angle),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneConfig {
    Templates(TemplateScene),
    Disk(DiskScene),
}

/// One sequence per template. Each sequence images a `patch` of the parent
/// grid (same pixel steps) at a random position, under a random rigid motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateScene {
    /// 8-bit grayscale PGM/PNG files, relative to the config file.
    pub template_paths: Vec<PathBuf>,
    /// Procedural templates added after the files.
    pub synthetic_templates: usize,
    pub synthetic_size: usize,
    pub medium: MediumParams,
    pub grid: GridConfig,
    /// `[rows, cols]` of the imaged patch; `None` images the whole grid.
    pub patch: Option<[usize; 2]>,
    pub motion: RandomMotion,
}

impl Default for TemplateScene {
    fn default() -> Self {
        Self {
            template_paths: Vec::new(),
            synthetic_templates: 8,
            synthetic_size: 128,
            medium: MediumParams::default(),
            grid: GridConfig::default(),
            patch: None,
            motion: RandomMotion::default(),
        }
    }
}

/// Either a rotation about a point near the patch or a translation; the
/// kind alternates with the sequence index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMotion {
    /// rad/s
    pub max_omega: f64,
    /// m/s
    pub max_speed: f64,
    /// Rotation centres fall within this distance of the patch centre (m).
    pub max_center_offset: f64,
}

impl Default for RandomMotion {
    fn default() -> Self {
        Self {
            max_omega: 12.0,
            max_speed: 0.5,
            max_center_offset: 0.03,
        }
    }
}

/// One sequence per angular velocity of the spinning disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskScene {
    pub phantom: DiskPhantom,
    /// Scatterers per square wavelength.
    pub density: f64,
    /// rad/s, counter-clockwise positive.
    pub speeds: Vec<f64>,
    pub grid: GridConfig,
}

impl Default for DiskScene {
    fn default() -> Self {
        Self {
            phantom: DiskPhantom::four_cysts([0.0, 0.065], 0.025, 0.006),
            density: 10.0,
            speeds: (0..=12).map(f64::from).collect(),
            grid: GridConfig {
                depth_range: [0.012, 0.118],
                half_angle_deg: 45.0,
                n_depth: None,
                n_angle: Some(256),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub frames_per_sequence: usize,
    /// Time between frames (s); defaults to one input acquisition,
    /// `input_transmits / prf`.
    pub frame_interval: Option<f64>,
    /// Train / validation / test fractions over sequences.
    pub split: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            frames_per_sequence: 2,
            frame_interval: None,
            split: [0.6, 0.2, 0.2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub width_multiplier: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { width_multiplier: 1.0 }
    }
}

/// Cyst and ring radii relative to each phantom cyst radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskRegions {
    pub cyst_scale: f64,
    pub ring_inner: f64,
    pub ring_outer: f64,
}

impl Default for DiskRegions {
    fn default() -> Self {
        Self {
            cyst_scale: 0.8,
            ring_inner: 1.2,
            ring_outer: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Fixed regions for CNR/gCNR; disk scenes derive them from the cysts.
    pub regions: Option<RegionSpec>,
    pub disk_regions: DiskRegions,
    /// `None` uses single-window SSIM.
    pub ssim_window: Option<usize>,
    pub dynamic_range_db: f64,
    pub gcnr_bins: usize,
    /// Points closer to the rotation centre than this many grid cells are
    /// left out of RAVE.
    pub rave_min_radius_cells: f64,
    /// Outer RAVE radius as a fraction of the disk radius.
    pub rave_max_radius_fraction: f64,
    pub bmode_png: bool,
    pub plots: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            regions: None,
            disk_regions: DiskRegions::default(),
            ssim_window: None,
            dynamic_range_db: 60.0,
            gcnr_bins: dwecho::eval::GCNR_BINS,
            rave_min_radius_cells: 2.0,
            rave_max_radius_fraction: 0.9,
            bmode_png: true,
            plots: true,
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Independent 64-bit seed for `(stream, index)` under the root seed.
pub fn derive_seed(seed: u64, stream: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_error)
    }

    /// Reads, resolves template paths against the file's directory, applies
    /// environment overrides and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let SceneConfig::Templates(t) = &mut cfg.scene {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in &mut t.template_paths {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        if let Ok(t) = std::env::var(THREADS_ENV) {
            if let Ok(n) = t.parse::<usize>() {
                self.threads = Some(n);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.validate().map_err(config_error)?;
        self.acquisition.input_scheme().map_err(config_error)?;
        self.acquisition.reference_scheme().map_err(config_error)?;
        self.train.validate().map_err(config_error)?;
        self.track.validate().map_err(config_error)?;
        self.das.validate().map_err(config_error)?;
        if self.threads == Some(0) {
            return Err(config_error("threads must be >= 1"));
        }
        if !(self.network.width_multiplier > 0.0) {
            return Err(config_error("width_multiplier must be > 0"));
        }
        let d = &self.dataset;
        if d.frames_per_sequence == 0 {
            return Err(config_error("frames_per_sequence must be >= 1"));
        }
        if let Some(dt) = d.frame_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_error("frame_interval must be > 0"));
            }
        }
        if d.split.iter().any(|f| !(*f >= 0.0)) || (d.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config_error("split fractions must be non-negative and sum to 1"));
        }
        match &self.scene {
            SceneConfig::Templates(t) => {
                if t.template_paths.is_empty() && t.synthetic_templates == 0 {
                    return Err(config_error("no templates requested"));
                }
                for p in &t.template_paths {
                    if !p.is_file() {
                        return Err(config_error(format!("template {} not found", p.display())));
                    }
                }
                let grid = t.grid.resolve(&self.probe).map_err(config_error)?;
                if let Some([r, c]) = t.patch {
                    if r < 2 || c < 2 || r > grid.n_depth || c > grid.n_angle {
                        return Err(config_error("patch must fit inside the grid"));
                    }
                }
                if t.synthetic_templates > 0 && t.synthetic_size < 2 {
                    return Err(config_error("synthetic_size must be >= 2"));
                }
            }
            SceneConfig::Disk(s) => {
                s.phantom.validate().map_err(config_error)?;
                if s.speeds.is_empty() || s.speeds.iter().any(|w| !w.is_finite()) {
                    return Err(config_error("disk scene needs finite speeds"));
                }
                if !(s.density > 0.0) {
                    return Err(config_error("density must be > 0"));
                }
                s.grid.resolve(&self.probe).map_err(config_error)?;
            }
        }
        let e = &self.evaluation;
        if e.ssim_window == Some(0) || e.gcnr_bins < 2 || !(e.dynamic_range_db > 0.0) {
            return Err(config_error("invalid evaluation settings"));
        }
        Ok(())
    }

    pub fn frame_interval(&self) -> f64 {
        self.dataset
            .frame_interval
            .unwrap_or(self.acquisition.input_transmits as f64 / self.acquisition.prf)
    }

    /// Training settings with the seed taken from the root seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "train", 0),
            ..self.train.clone()
        }
    }

    /// Hash of everything that determines the simulated dataset.
    pub fn simulation_hash(&self) -> String {
        let v = serde_json::json!({
            "seed": self.seed,
            "probe": self.probe,
            "acquisition": self.acquisition,
            "scene": self.scene,
            "dataset": self.dataset,
            "das": self.das,
            "track": self.track,
        });
        sha256_hex(v.to_string().as_bytes())
    }

    /// Hash of the whole config except output location and thread count.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
            o.remove("threads");
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"seed": 7, "scene": {"kind": "disk", "speeds": [3.0]}}"#
    }

    #[test]
    fn seed_is_mandatory() {
        let err = ExperimentConfig::from_json(r#"{"scene": {"kind": "disk"}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg = ExperimentConfig::from_json(minimal()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn split_must_sum_to_one() {
        let mut cfg = ExperimentConfig::from_json(minimal()).unwrap();
        cfg.dataset.split = [0.5, 0.2, 0.2];
        assert!(cfg.validate().is_err());
        cfg.dataset.split = [0.6, 0.2, 0.2];
        cfg.dataset.frames_per_sequence = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hashes_ignore_output_location() {
        let a = ExperimentConfig::from_json(minimal()).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        b.threads = Some(3);
        assert_eq!(a.config_hash(), b.config_hash());
        b.train.initial_lr = 1e-3;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.simulation_hash(), b.simulation_hash());
        b.seed = 8;
        assert_ne!(a.simulation_hash(), b.simulation_hash());
    }

    #[test]
    fn derived_seeds_differ_by_stream_and_index() {
        assert_ne!(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
        assert_ne!(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
        assert_eq!(derive_seed(1, "a", 2), derive_seed(1, "a", 2));
    }
}
