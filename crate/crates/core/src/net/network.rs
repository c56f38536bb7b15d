//! Layered complex network: architecture description, forward pass with
//! cache, backward pass and flat parameter views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{complex_conv2d, complex_conv2d_backward, maxout_channels, maxout_channels_backward, ConvWeights};
use super::tensor::ComplexTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Odd; padding keeps the spatial size.
    pub kernel_size: usize,
    /// Convolution outputs before maxout.
    pub kernel_count: usize,
    /// Maxout groups; 1 disables maxout.
    pub maxout_pieces: usize,
}

impl LayerSpec {
    pub fn new(kernel_size: usize, kernel_count: usize, maxout_pieces: usize) -> Result<Self> {
        let spec = Self {
            kernel_size,
            kernel_count,
            maxout_pieces,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel size must be odd"));
        }
        if self.maxout_pieces == 0 || self.kernel_count == 0 || self.kernel_count % self.maxout_pieces != 0 {
            return Err(Error::invalid(format!(
                "kernel count {} is not a positive multiple of {} maxout pieces",
                self.kernel_count, self.maxout_pieces
            )));
        }
        Ok(())
    }

    pub fn output_channels(&self) -> usize {
        self.kernel_count / self.maxout_pieces
    }

    /// Kernel count scaled by `width`, kept a non-zero multiple of the pieces.
    pub fn widened(&self, width: f64) -> Self {
        let p = self.maxout_pieces;
        let groups = (self.kernel_count as f64 * width / p as f64).round() as usize;
        Self {
            kernel_count: (groups * p).max(p),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Conv(LayerSpec),
    /// Branches share the input; outputs are concatenated in order.
    Parallel(Vec<LayerSpec>),
}

impl Stage {
    fn specs(&self) -> Vec<LayerSpec> {
        match self {
            Stage::Conv(s) => vec![*s],
            Stage::Parallel(v) => v.clone(),
        }
    }

    pub fn output_channels(&self) -> usize {
        self.specs().iter().map(LayerSpec::output_channels).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_channels: usize,
    pub stages: Vec<Stage>,
}

impl ArchSpec {
    /// Five-stage layout with 4-piece maxout everywhere:
    /// 3x3/256, 5x5/128, 9x9/64, {11, 13, 15, 17}x/8 in parallel, 1x1/4.
    /// Kernel counts are scaled by `width`.
    pub fn reference(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid("width multiplier must be > 0"));
        }
        let l = |k, n| LayerSpec::new(k, n, 4).map(|s| s.widened(width));
        Ok(Self {
            input_channels: 3,
            stages: vec![
                Stage::Conv(l(3, 256)?),
                Stage::Conv(l(5, 128)?),
                Stage::Conv(l(9, 64)?),
                Stage::Parallel(vec![l(11, 8)?, l(13, 8)?, l(15, 8)?, l(17, 8)?]),
                Stage::Conv(l(1, 4)?),
            ],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.stages.is_empty() {
            return Err(Error::invalid("architecture needs inputs and at least one stage"));
        }
        for s in &self.stages {
            let specs = s.specs();
            if specs.is_empty() {
                return Err(Error::invalid("parallel stage without branches"));
            }
            for l in specs {
                l.validate()?;
            }
        }
        Ok(())
    }

    /// Channel count after each stage.
    pub fn channel_flow(&self) -> Vec<usize> {
        self.stages.iter().map(Stage::output_channels).collect()
    }

    pub fn output_channels(&self) -> usize {
        self.stages.last().map_or(self.input_channels, Stage::output_channels)
    }

    /// Complex parameters (kernels plus biases).
    pub fn complex_parameter_count(&self) -> usize {
        let mut in_ch = self.input_channels;
        let mut total = 0;
        for s in &self.stages {
            for l in s.specs() {
                total += l.kernel_count * (in_ch * l.kernel_size * l.kernel_size + 1);
            }
            in_ch = s.output_channels();
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    pub weights: ConvWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexNetwork {
    pub arch: ArchSpec,
    /// One entry per stage; conv stages hold a single layer.
    pub stages: Vec<Vec<ConvLayer>>,
}

/// Values kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each stage.
    inputs: Vec<ComplexTensor>,
    /// Maxout choice per stage and branch.
    choices: Vec<Vec<Vec<u8>>>,
    pub output: ComplexTensor,
}

/// Gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub stages: Vec<Vec<ConvWeights>>,
}

impl Gradients {
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.stages.iter_mut().zip(&other.stages) {
            for (x, y) in a.iter_mut().zip(b) {
                x.accumulate(y);
            }
        }
    }

    /// Same order as [`ComplexNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for stage in &self.stages {
            for w in stage {
                push_weights(&mut out, w);
            }
        }
        out
    }
}

fn push_weights(out: &mut Vec<f64>, w: &ConvWeights) {
    for (r, i) in w.w_re.iter().zip(&w.w_im) {
        out.push(*r);
        out.push(*i);
    }
    for (r, i) in w.b_re.iter().zip(&w.b_im) {
        out.push(*r);
        out.push(*i);
    }
}

impl ComplexNetwork {
    /// All weights and biases zero.
    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let mut in_ch = arch.input_channels;
        let mut stages = Vec::new();
        for s in &arch.stages {
            stages.push(
                s.specs()
                    .into_iter()
                    .map(|spec| ConvLayer {
                        spec,
                        weights: ConvWeights::zeros(spec.kernel_count, in_ch, spec.kernel_size),
                    })
                    .collect(),
            );
            in_ch = s.output_channels();
        }
        Ok(Self { arch, stages })
    }

    /// Xavier-uniform kernels, drawn independently for real and imaginary
    /// parts with fans counted in complex channels; zero biases.
    pub fn xavier(arch: ArchSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for stage in &mut net.stages {
            for layer in stage {
                let w = &mut layer.weights;
                let k2 = (w.kernel_size * w.kernel_size) as f64;
                let fan_in = w.in_channels as f64 * k2;
                let fan_out = w.out_channels as f64 * k2;
                let limit = (6.0 / (fan_in + fan_out)).sqrt();
                for (r, i) in w.w_re.iter_mut().zip(w.w_im.iter_mut()) {
                    *r = rng.random_range(-limit..limit);
                    *i = rng.random_range(-limit..limit);
                }
            }
        }
        Ok(net)
    }

    pub fn input_channels(&self) -> usize {
        self.arch.input_channels
    }

    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.stages.iter().flatten()
    }

    pub fn complex_parameter_count(&self) -> usize {
        self.layers().map(|l| l.weights.complex_parameter_count()).sum()
    }

    /// Flat real view: per layer in stage order, kernel `(re, im)` pairs in
    /// `(out, in, ky, kx)` order, then bias pairs.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.complex_parameter_count());
        for l in self.layers() {
            push_weights(&mut out, &l.weights);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != 2 * self.complex_parameter_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                2 * self.complex_parameter_count(),
                values.len()
            )));
        }
        let mut it = values.chunks_exact(2);
        for stage in &mut self.stages {
            for layer in stage {
                let w = &mut layer.weights;
                for (r, i) in w.w_re.iter_mut().zip(w.w_im.iter_mut()) {
                    let c = it.next().expect("length checked");
                    *r = c[0];
                    *i = c[1];
                }
                for (r, i) in w.b_re.iter_mut().zip(w.b_im.iter_mut()) {
                    let c = it.next().expect("length checked");
                    *r = c[0];
                    *i = c[1];
                }
            }
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: &ComplexTensor) -> Result<ForwardCache> {
        if x.channels != self.arch.input_channels {
            return Err(Error::shape(format!(
                "network expects {} input channels, got {}",
                self.arch.input_channels, x.channels
            )));
        }
        if x.re.iter().chain(&x.im).any(|v| !v.is_finite()) {
            return Err(Error::invalid("network input must be finite"));
        }
        let mut inputs = Vec::with_capacity(self.stages.len());
        let mut choices = Vec::with_capacity(self.stages.len());
        let mut current = x.clone();
        for stage in &self.stages {
            let mut outs = Vec::with_capacity(stage.len());
            let mut picks = Vec::with_capacity(stage.len());
            for layer in stage {
                let pre = complex_conv2d(&current, &layer.weights)?;
                let (out, idx) = maxout_channels(&pre, layer.spec.maxout_pieces)?;
                debug_assert_eq!((out.h, out.w), (current.h, current.w));
                outs.push(out);
                picks.push(idx);
            }
            let next = if outs.len() == 1 {
                outs.pop().expect("one branch")
            } else {
                ComplexTensor::concat(&outs.iter().collect::<Vec<_>>())?
            };
            inputs.push(std::mem::replace(&mut current, next));
            choices.push(picks);
        }
        Ok(ForwardCache {
            inputs,
            choices,
            output: current,
        })
    }

    pub fn forward(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        self.forward_cached(x).map(|c| c.output)
    }

    /// Backpropagates the output cotangent `grad_out` through the cached pass.
    /// Returns the weight gradients and the input cotangent.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &ComplexTensor) -> Result<(Gradients, ComplexTensor)> {
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::shape("output cotangent shape differs from the output"));
        }
        let mut grads: Vec<Vec<ConvWeights>> = vec![Vec::new(); self.stages.len()];
        let mut g = grad_out.clone();
        for s in (0..self.stages.len()).rev() {
            let stage = &self.stages[s];
            let input = &cache.inputs[s];
            let n = input.plane_len();
            let mut grad_in = ComplexTensor::zeros(input.channels, input.h, input.w);
            let mut offset = 0;
            let mut stage_grads = Vec::with_capacity(stage.len());
            for (b, layer) in stage.iter().enumerate() {
                let oc = layer.spec.output_channels();
                let slice = ComplexTensor {
                    channels: oc,
                    h: g.h,
                    w: g.w,
                    re: g.re[offset * n..(offset + oc) * n].to_vec(),
                    im: g.im[offset * n..(offset + oc) * n].to_vec(),
                };
                offset += oc;
                let g_pre = maxout_channels_backward(&slice, &cache.choices[s][b], layer.spec.maxout_pieces);
                let (gi, gw) = complex_conv2d_backward(input, &layer.weights, &g_pre)?;
                for (a, v) in grad_in.re.iter_mut().zip(&gi.re) {
                    *a += v;
                }
                for (a, v) in grad_in.im.iter_mut().zip(&gi.im) {
                    *a += v;
                }
                stage_grads.push(gw);
            }
            grads[s] = stage_grads;
            g = grad_in;
        }
        Ok((Gradients { stages: grads }, g))
    }
}

/// `sum |yhat - y|^2` of one sample.
pub fn sample_loss(yhat: &ComplexTensor, y: &ComplexTensor) -> Result<f64> {
    if yhat.shape() != y.shape() {
        return Err(Error::shape("prediction and target shapes differ"));
    }
    Ok(yhat
        .re
        .iter()
        .zip(&y.re)
        .chain(yhat.im.iter().zip(&y.im))
        .map(|(a, b)| (a - b).powi(2))
        .sum())
}

/// Batch mean of the per-sample squared complex L2 error.
pub fn loss(yhat: &[ComplexTensor], y: &[ComplexTensor]) -> Result<f64> {
    if yhat.len() != y.len() || yhat.is_empty() {
        return Err(Error::shape("loss needs equally sized, non-empty batches"));
    }
    let mut total = 0.0;
    for (a, b) in yhat.iter().zip(y) {
        total += sample_loss(a, b)?;
    }
    Ok(total / yhat.len() as f64)
}

/// Cotangent of [`sample_loss`]: `2 (yhat - y)`.
pub fn sample_loss_grad(yhat: &ComplexTensor, y: &ComplexTensor) -> Result<ComplexTensor> {
    if yhat.shape() != y.shape() {
        return Err(Error::shape("prediction and target shapes differ"));
    }
    Ok(ComplexTensor {
        re: yhat.re.iter().zip(&y.re).map(|(a, b)| 2.0 * (a - b)).collect(),
        im: yhat.im.iter().zip(&y.im).map(|(a, b)| 2.0 * (a - b)).collect(),
        ..yhat.clone()
    })
}
