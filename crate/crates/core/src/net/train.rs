//! Mini-batch Adam training with a plateau schedule, dataset splitting and
//! inference on beamformed stacks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{sample_loss, sample_loss_grad, ComplexNetwork, Gradients};
use super::tensor::ComplexTensor;
use crate::iq::IQImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over a flat real parameter vector; real and imaginary parts are
/// independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape("optimizer state and parameters differ in length"));
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleEvent {
    Improved,
    Stagnant,
    LrHalved,
    Stop,
}

/// Halves the learning rate every `halving_patience` epochs without a new
/// best validation loss and stops after `stop_patience` such epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub best: f64,
    pub stagnant: usize,
    pub halving_patience: usize,
    pub stop_patience: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, halving_patience: usize, stop_patience: usize) -> Self {
        Self {
            lr,
            best: f64::INFINITY,
            stagnant: 0,
            halving_patience,
            stop_patience,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> ScheduleEvent {
        if val_loss < self.best {
            self.best = val_loss;
            self.stagnant = 0;
            return ScheduleEvent::Improved;
        }
        self.stagnant += 1;
        if self.stagnant >= self.stop_patience {
            ScheduleEvent::Stop
        } else if self.stagnant % self.halving_patience == 0 {
            self.lr *= 0.5;
            ScheduleEvent::LrHalved
        } else {
            ScheduleEvent::Stagnant
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_halving_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            initial_lr: 1e-4,
            lr_halving_patience: 10,
            early_stop_patience: 20,
            max_epochs: 200,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_halving_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("batch size and patiences must be > 0"));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        Ok(())
    }
}

/// Normalized `(3, h, w)` input and `(1, h, w)` target of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: ComplexTensor,
    pub target: ComplexTensor,
    /// Factor that was divided out of both.
    pub scale: f64,
}

/// Max envelope of the channel-mean (the compounded input).
pub fn normalization_scale(input: &ComplexTensor) -> f64 {
    input.channel_mean().max_modulus()
}

impl TrainingPair {
    /// Scales input and target by the input's own compound peak.
    pub fn normalized(input: ComplexTensor, target: ComplexTensor) -> Result<Self> {
        if (input.h, input.w) != (target.h, target.w) || target.channels != 1 {
            return Err(Error::shape("target must be one channel on the input grid"));
        }
        let scale = normalization_scale(&input);
        if !(scale > 0.0) {
            return Err(Error::Degenerate("input stack is identically zero".into()));
        }
        Ok(Self {
            input: input.scaled(1.0 / scale),
            target: target.scaled(1.0 / scale),
            scale,
        })
    }

    pub fn from_images(inputs: &[&IQImage], target: &IQImage) -> Result<Self> {
        Self::normalized(ComplexTensor::from_images(inputs)?, ComplexTensor::from_images(&[target])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainHistory {
    /// Epoch 0 holds the losses of the initial weights.
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.records {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", r.epoch, r.train_loss, r.val_loss, r.lr));
        }
        s
    }
}

/// State that lets an interrupted run continue exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub net: ComplexNetwork,
    pub best: ComplexNetwork,
    pub adam: Adam,
    pub schedule: PlateauSchedule,
    pub history: TrainHistory,
    pub epoch: usize,
}

/// Sum of per-sample losses and gradients, accumulated in sample order so
/// the result does not depend on the thread count.
fn batch_gradients(net: &ComplexNetwork, batch: &[&TrainingPair]) -> Result<(f64, Gradients)> {
    let parts: Vec<(f64, Gradients)> = batch
        .par_iter()
        .map(|pair| {
            let cache = net.forward_cached(&pair.input)?;
            let l = sample_loss(&cache.output, &pair.target)?;
            let g = sample_loss_grad(&cache.output, &pair.target)?;
            let (grads, _) = net.backward(&cache, &g)?;
            Ok((l, grads))
        })
        .collect::<Result<_>>()?;
    let mut it = parts.into_iter();
    let (mut loss, mut grads) = it.next().ok_or_else(|| Error::Empty("empty batch".into()))?;
    for (l, g) in it {
        loss += l;
        grads.accumulate(&g);
    }
    Ok((loss, grads))
}

/// Mean per-sample loss of `net` on `pairs`.
pub fn evaluate_loss(net: &ComplexNetwork, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("no samples to evaluate".into()));
    }
    let losses: Vec<f64> = pairs
        .par_iter()
        .map(|p| sample_loss(&net.forward(&p.input)?, &p.target))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / pairs.len() as f64)
}

pub fn start_training(net: ComplexNetwork, train: &[TrainingPair], val: &[TrainingPair], cfg: &TrainConfig) -> Result<TrainState> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training and validation splits must be non-empty".into()));
    }
    let train_loss = evaluate_loss(&net, train)?;
    let val_loss = evaluate_loss(&net, val)?;
    let mut schedule = PlateauSchedule::new(cfg.initial_lr, cfg.lr_halving_patience, cfg.early_stop_patience);
    schedule.observe(val_loss);
    let n = net.parameters().len();
    Ok(TrainState {
        best: net.clone(),
        net,
        adam: Adam::new(cfg.adam, n),
        schedule,
        history: TrainHistory {
            records: vec![EpochRecord {
                epoch: 0,
                train_loss,
                val_loss,
                lr: cfg.initial_lr,
            }],
            best_epoch: 0,
            best_val_loss: val_loss,
            stopped_early: false,
        },
        epoch: 0,
    })
}

/// One pass over the shuffled training split. Returns `false` once the
/// schedule asks to stop.
pub fn train_epoch(state: &mut TrainState, train: &[TrainingPair], val: &[TrainingPair], cfg: &TrainConfig) -> Result<bool> {
    if state.history.stopped_early {
        return Ok(false);
    }
    state.epoch += 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (state.epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    let lr = state.schedule.lr;
    let mut params = state.net.parameters();
    let mut total = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let batch: Vec<&TrainingPair> = chunk.iter().map(|&i| &train[i]).collect();
        let (loss, grads) = batch_gradients(&state.net, &batch)?;
        total += loss;
        let inv = 1.0 / batch.len() as f64;
        let flat: Vec<f64> = grads.flatten().into_iter().map(|g| g * inv).collect();
        state.adam.update(&mut params, &flat, lr)?;
        state.net.set_parameters(&params)?;
    }
    let train_loss = total / train.len() as f64;
    let val_loss = evaluate_loss(&state.net, val)?;
    state.history.records.push(EpochRecord {
        epoch: state.epoch,
        train_loss,
        val_loss,
        lr,
    });
    let event = state.schedule.observe(val_loss);
    if event == ScheduleEvent::Improved {
        state.best = state.net.clone();
        state.history.best_epoch = state.epoch;
        state.history.best_val_loss = val_loss;
    }
    if event == ScheduleEvent::Stop {
        state.history.stopped_early = true;
        return Ok(false);
    }
    Ok(state.epoch < cfg.max_epochs)
}

/// Full training run; returns the best-validation weights and the history.
pub fn train(
    net: ComplexNetwork,
    train_set: &[TrainingPair],
    val_set: &[TrainingPair],
    cfg: &TrainConfig,
) -> Result<(ComplexNetwork, TrainHistory)> {
    let mut state = start_training(net, train_set, val_set, cfg)?;
    while state.epoch < cfg.max_epochs && train_epoch(&mut state, train_set, val_set, cfg)? {}
    Ok((state.best, state.history))
}

/// Disjoint index sets for the given fractions; counts use the largest
/// remainder rule so they always add up to `n`.
pub fn split_cases(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::invalid("split fractions must be non-negative"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..fractions.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(counts.len());
    let mut start = 0;
    for c in counts {
        let mut part = order[start..start + c].to_vec();
        part.sort_unstable();
        out.push(part);
        start += c;
    }
    Ok(out)
}

/// Reconstructs one frame from its 3 beamformed input images.
pub fn reconstruct(net: &ComplexNetwork, inputs: &[&IQImage]) -> Result<IQImage> {
    if inputs.len() != net.input_channels() {
        return Err(Error::shape(format!(
            "network expects {} images, got {}",
            net.input_channels(),
            inputs.len()
        )));
    }
    let x = ComplexTensor::from_images(inputs)?;
    let scale = normalization_scale(&x);
    let frame_time = inputs.iter().map(|i| i.frame_time).sum::<f64>() / inputs.len() as f64;
    if !(scale > 0.0) {
        return net.forward(&x)?.to_image(inputs[0].grid, frame_time);
    }
    let y = net.forward(&x.scaled(1.0 / scale))?;
    y.scaled(scale).to_image(inputs[0].grid, frame_time)
}
