//! `train`: fits the complex network on a dataset's train/val splits.

use std::path::Path;

use dwecho::io::write_bytes;
use dwecho::net::{
    load_checkpoint, save_checkpoint, start_training, train_epoch, ArchSpec, ComplexNetwork, TrainHistory,
    TrainingPair,
};
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, ExperimentConfig};
use crate::dataset::{create_dir, write_manifest, Dataset, Split};
use crate::error::{data, CliError, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.dwck";
pub const BEST_FILE: &str = "best.dwck";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub dataset_hash: String,
    pub width_multiplier: f64,
    pub complex_parameters: usize,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub history: TrainHistory,
}

/// Checks that `dataset` was simulated from the same settings as `cfg`.
pub fn check_dataset(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<()> {
    if dataset.manifest.simulation_hash != cfg.simulation_hash() {
        return Err(data(format!(
            "dataset {} was simulated from a different configuration",
            dataset.dir.display()
        )));
    }
    Ok(())
}

pub fn load_pairs(dataset: &Dataset, split: Split) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for s in dataset.split(split) {
        for f in 0..dataset.sequences[s].frames.len() {
            let inputs = dataset.load_inputs(s, f)?;
            let target = dataset.load_reference(s, f)?;
            let refs: Vec<_> = inputs.iter().collect();
            pairs.push(TrainingPair::from_images(&refs, &target)?);
        }
    }
    Ok(pairs)
}

pub fn initial_network(cfg: &ExperimentConfig) -> Result<ComplexNetwork> {
    let arch = ArchSpec::reference(cfg.network.width_multiplier)?;
    Ok(ComplexNetwork::xavier(arch, derive_seed(cfg.seed, "init", 0))?)
}

/// Trains into `out`, writing a resumable checkpoint after every epoch.
/// With `resume`, training continues from that checkpoint's state.
pub fn cmd_train(cfg: &ExperimentConfig, dataset_dir: &Path, out: &Path, resume: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    let dataset = Dataset::open(dataset_dir)?;
    check_dataset(cfg, &dataset)?;
    let train_set = load_pairs(&dataset, Split::Train)?;
    let val_set = load_pairs(&dataset, Split::Val)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(data("dataset needs non-empty train and val splits"));
    }
    let tcfg = cfg.train_config();
    let hash = dataset.manifest.simulation_hash.clone();
    let width = cfg.network.width_multiplier;
    let mut state = match resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            if ck.header.dataset_hash.as_deref() != Some(hash.as_str()) {
                return Err(data(format!("{} was trained on another dataset", path.display())));
            }
            if ck.header.arch != ArchSpec::reference(width)? {
                return Err(CliError::Config("checkpoint architecture differs from the config".into()));
            }
            ck.state
                .ok_or_else(|| data(format!("{} carries no resume state", path.display())))?
        }
        None => start_training(initial_network(cfg)?, &train_set, &val_set, &tcfg)?,
    };
    create_dir(out)?;
    if resume.is_none() {
        save_checkpoint(&out.join(CHECKPOINT_FILE), &state.best, width, Some(&tcfg), Some(&state), Some(hash.clone()))?;
    }
    while state.epoch < tcfg.max_epochs && !state.history.stopped_early {
        let more = train_epoch(&mut state, &train_set, &val_set, &tcfg)?;
        let r = state.history.records.last().expect("epoch record");
        log::info!(
            "epoch {} train {:.4e} val {:.4e} lr {:.2e}",
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.lr
        );
        save_checkpoint(&out.join(CHECKPOINT_FILE), &state.best, width, Some(&tcfg), Some(&state), Some(hash.clone()))?;
        if !more {
            break;
        }
    }
    save_checkpoint(&out.join(BEST_FILE), &state.best, width, Some(&tcfg), None, Some(hash.clone()))?;
    write_bytes(&out.join("history.csv"), state.history.to_csv().as_bytes())?;
    let summary = TrainSummary {
        config_hash: cfg.config_hash(),
        dataset_hash: hash,
        width_multiplier: width,
        complex_parameters: state.best.complex_parameter_count(),
        train_pairs: train_set.len(),
        val_pairs: val_set.len(),
        epochs: state.epoch,
        best_epoch: state.history.best_epoch,
        best_val_loss: state.history.best_val_loss,
        stopped_early: state.history.stopped_early,
        history: state.history.clone(),
    };
    write_manifest(&out.join("train.json"), &summary)?;
    Ok(summary)
}
