//! Complex convolution and amplitude maxout, forward and backward.
//!
//! Gradients follow the split-real convention: for a real loss `L` and a
//! complex quantity `z`, the cotangent is `dL/dRe(z) + j dL/dIm(z)`. For
//! `z = w x` this gives `g_w = g conj(x)` and `g_x = g conj(w)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::ComplexTensor;
use crate::{Error, Result};

/// Complex kernels `(out, in, k, k)` and one complex bias per output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub w_re: Vec<f64>,
    pub w_im: Vec<f64>,
    pub b_re: Vec<f64>,
    pub b_im: Vec<f64>,
}

impl ConvWeights {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Self {
        let n = out_channels * in_channels * kernel_size * kernel_size;
        Self {
            out_channels,
            in_channels,
            kernel_size,
            w_re: vec![0.0; n],
            w_im: vec![0.0; n],
            b_re: vec![0.0; out_channels],
            b_im: vec![0.0; out_channels],
        }
    }

    pub fn kernel_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel_size + ky) * self.kernel_size + kx
    }

    /// Number of complex parameters (kernels plus biases).
    pub fn complex_parameter_count(&self) -> usize {
        self.w_re.len() + self.b_re.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.out_channels * self.in_channels * self.kernel_size * self.kernel_size;
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid("kernel size must be odd for same padding"));
        }
        if self.w_re.len() != n || self.w_im.len() != n || self.b_re.len() != self.out_channels || self.b_im.len() != self.out_channels {
            return Err(Error::shape("conv weight buffers disagree with their dimensions"));
        }
        Ok(())
    }

    /// `self += other`, element-wise.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.w_re.iter_mut().zip(&other.w_re) {
            *a += b;
        }
        for (a, b) in self.w_im.iter_mut().zip(&other.w_im) {
            *a += b;
        }
        for (a, b) in self.b_re.iter_mut().zip(&other.b_re) {
            *a += b;
        }
        for (a, b) in self.b_im.iter_mut().zip(&other.b_im) {
            *a += b;
        }
    }
}

/// Calls `f(ky, kx, dy, dx, y_range, x_range)` for every kernel tap, where
/// output pixel `(y, x)` reads input `(y + dy, x + dx)` and the ranges keep
/// both inside an `h x w` plane.
#[inline]
fn for_each_tap(
    h: usize,
    w: usize,
    k: usize,
    mut f: impl FnMut(usize, usize, isize, isize, std::ops::Range<usize>, std::ops::Range<usize>),
) {
    let pad = (k / 2) as isize;
    let (hi, wi) = (h as isize, w as isize);
    for ky in 0..k {
        let dy = ky as isize - pad;
        let ys = (-dy).max(0)..(hi - dy).min(hi);
        if ys.start >= ys.end {
            continue;
        }
        for kx in 0..k {
            let dx = kx as isize - pad;
            let xs = (-dx).max(0)..(wi - dx).min(wi);
            if xs.start >= xs.end {
                continue;
            }
            f(
                ky,
                kx,
                dy,
                dx,
                ys.start as usize..ys.end as usize,
                xs.start as usize..xs.end as usize,
            );
        }
    }
}

/// Same-size complex cross-correlation with zero padding plus bias.
pub fn complex_conv2d(input: &ComplexTensor, weights: &ConvWeights) -> Result<ComplexTensor> {
    weights.validate()?;
    if input.channels != weights.in_channels {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            weights.in_channels, input.channels
        )));
    }
    let (h, w) = (input.h, input.w);
    let n = h * w;
    let mut out = ComplexTensor::zeros(weights.out_channels, h, w);
    out.re
        .par_chunks_mut(n.max(1))
        .zip(out.im.par_chunks_mut(n.max(1)))
        .enumerate()
        .for_each(|(o, (ore, oim))| {
            ore.fill(weights.b_re[o]);
            oim.fill(weights.b_im[o]);
            for i in 0..weights.in_channels {
                let ire = &input.re[i * n..(i + 1) * n];
                let iim = &input.im[i * n..(i + 1) * n];
                for_each_tap(h, w, weights.kernel_size, |ky, kx, dy, dx, ys, xs| {
                    let idx = weights.kernel_index(o, i, ky, kx);
                    let (wr, wi) = (weights.w_re[idx], weights.w_im[idx]);
                    if wr == 0.0 && wi == 0.0 {
                        return;
                    }
                    for y in ys {
                        let orow = y * w;
                        let irow = ((y as isize + dy) as usize) * w;
                        let src = (irow as isize + dx + xs.start as isize) as usize;
                        let len = xs.end - xs.start;
                        let a = &ire[src..src + len];
                        let b = &iim[src..src + len];
                        let dr = &mut ore[orow + xs.start..orow + xs.start + len];
                        let di = &mut oim[orow + xs.start..orow + xs.start + len];
                        for t in 0..len {
                            dr[t] += wr * a[t] - wi * b[t];
                            di[t] += wr * b[t] + wi * a[t];
                        }
                    }
                });
            }
        });
    Ok(out)
}

/// Input cotangent and weight gradients of [`complex_conv2d`].
pub fn complex_conv2d_backward(
    input: &ComplexTensor,
    weights: &ConvWeights,
    grad_out: &ComplexTensor,
) -> Result<(ComplexTensor, ConvWeights)> {
    if grad_out.shape() != (weights.out_channels, input.h, input.w) || input.channels != weights.in_channels {
        return Err(Error::shape("conv backward shapes disagree"));
    }
    let (h, w) = (input.h, input.w);
    let n = h * w;
    let k = weights.kernel_size;

    let mut grad_in = ComplexTensor::zeros(input.channels, h, w);
    grad_in
        .re
        .par_chunks_mut(n.max(1))
        .zip(grad_in.im.par_chunks_mut(n.max(1)))
        .enumerate()
        .for_each(|(i, (gre, gim))| {
            for o in 0..weights.out_channels {
                let ore = &grad_out.re[o * n..(o + 1) * n];
                let oim = &grad_out.im[o * n..(o + 1) * n];
                for_each_tap(h, w, k, |ky, kx, dy, dx, ys, xs| {
                    let idx = weights.kernel_index(o, i, ky, kx);
                    let (wr, wi) = (weights.w_re[idx], weights.w_im[idx]);
                    for y in ys {
                        let orow = y * w;
                        let dst = (((y as isize + dy) as usize * w) as isize + dx + xs.start as isize) as usize;
                        let len = xs.end - xs.start;
                        let gr = &ore[orow + xs.start..orow + xs.start + len];
                        let gi = &oim[orow + xs.start..orow + xs.start + len];
                        let dr = &mut gre[dst..dst + len];
                        let di = &mut gim[dst..dst + len];
                        for t in 0..len {
                            dr[t] += wr * gr[t] + wi * gi[t];
                            di[t] += wr * gi[t] - wi * gr[t];
                        }
                    }
                });
            }
        });

    let mut grad_w = ConvWeights::zeros(weights.out_channels, weights.in_channels, k);
    let per_out = weights.in_channels * k * k;
    let bias: Vec<(f64, f64)> = (0..weights.out_channels)
        .map(|o| {
            let gr: f64 = grad_out.re[o * n..(o + 1) * n].iter().sum();
            let gi: f64 = grad_out.im[o * n..(o + 1) * n].iter().sum();
            (gr, gi)
        })
        .collect();
    for (o, (r, i)) in bias.into_iter().enumerate() {
        grad_w.b_re[o] = r;
        grad_w.b_im[o] = i;
    }
    grad_w
        .w_re
        .par_chunks_mut(per_out.max(1))
        .zip(grad_w.w_im.par_chunks_mut(per_out.max(1)))
        .enumerate()
        .for_each(|(o, (wre, wim))| {
            let ore = &grad_out.re[o * n..(o + 1) * n];
            let oim = &grad_out.im[o * n..(o + 1) * n];
            for i in 0..weights.in_channels {
                let ire = &input.re[i * n..(i + 1) * n];
                let iim = &input.im[i * n..(i + 1) * n];
                for_each_tap(h, w, k, |ky, kx, dy, dx, ys, xs| {
                    let mut sr = 0.0;
                    let mut si = 0.0;
                    for y in ys {
                        let orow = y * w;
                        let src = (((y as isize + dy) as usize * w) as isize + dx + xs.start as isize) as usize;
                        let len = xs.end - xs.start;
                        let gr = &ore[orow + xs.start..orow + xs.start + len];
                        let gi = &oim[orow + xs.start..orow + xs.start + len];
                        let a = &ire[src..src + len];
                        let b = &iim[src..src + len];
                        for t in 0..len {
                            sr += gr[t] * a[t] + gi[t] * b[t];
                            si += gi[t] * a[t] - gr[t] * b[t];
                        }
                    }
                    let idx = (i * k + ky) * k + kx;
                    wre[idx] = sr;
                    wim[idx] = si;
                });
            }
        });
    Ok((grad_in, grad_w))
}

/// Element-wise pick of the branch value with the largest modulus; ties go
/// to the lowest branch index. Also returns the chosen branch per element.
pub fn amu_with_index(branches: &[&ComplexTensor]) -> Result<(ComplexTensor, Vec<u8>)> {
    if branches.len() < 2 {
        return Err(Error::invalid("maxout needs at least two branches"));
    }
    if branches.len() > u8::MAX as usize {
        return Err(Error::invalid("too many maxout branches"));
    }
    let shape = branches[0].shape();
    if branches.iter().any(|b| b.shape() != shape) {
        return Err(Error::shape("maxout branches differ in shape"));
    }
    let mut out = ComplexTensor::zeros(shape.0, shape.1, shape.2);
    let mut index = vec![0u8; out.len()];
    for e in 0..out.len() {
        let mut best = 0usize;
        let mut best_mod = branches[0].re[e].powi(2) + branches[0].im[e].powi(2);
        for (k, b) in branches.iter().enumerate().skip(1) {
            let m = b.re[e].powi(2) + b.im[e].powi(2);
            if m > best_mod {
                best = k;
                best_mod = m;
            }
        }
        out.re[e] = branches[best].re[e];
        out.im[e] = branches[best].im[e];
        index[e] = best as u8;
    }
    Ok((out, index))
}

pub fn amu(branches: &[&ComplexTensor]) -> Result<ComplexTensor> {
    amu_with_index(branches).map(|(t, _)| t)
}

/// Maxout over `pieces` contiguous channel groups of a conv output:
/// output channel `c` competes among pre-activation channels
/// `c, c + K/pieces, c + 2K/pieces, ...`.
pub fn maxout_channels(pre: &ComplexTensor, pieces: usize) -> Result<(ComplexTensor, Vec<u8>)> {
    if pieces == 0 || pre.channels % pieces != 0 {
        return Err(Error::shape("channel count not divisible by maxout pieces"));
    }
    if pieces == 1 {
        return Ok((pre.clone(), vec![0; pre.len()]));
    }
    let group = pre.channels / pieces;
    let n = group * pre.plane_len();
    let parts: Vec<ComplexTensor> = (0..pieces)
        .map(|p| ComplexTensor {
            channels: group,
            h: pre.h,
            w: pre.w,
            re: pre.re[p * n..(p + 1) * n].to_vec(),
            im: pre.im[p * n..(p + 1) * n].to_vec(),
        })
        .collect();
    let refs: Vec<&ComplexTensor> = parts.iter().collect();
    amu_with_index(&refs)
}

/// Routes the output cotangent back to the selected pre-activation channel.
pub fn maxout_channels_backward(grad_out: &ComplexTensor, index: &[u8], pieces: usize) -> ComplexTensor {
    if pieces == 1 {
        return grad_out.clone();
    }
    let n = grad_out.len();
    let mut grad = ComplexTensor::zeros(grad_out.channels * pieces, grad_out.h, grad_out.w);
    for e in 0..n {
        let k = index[e] as usize * n + e;
        grad.re[k] = grad_out.re[e];
        grad.im[k] = grad_out.im[e];
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn unit_kernel_is_identity_and_j_rotates() {
        let x = ComplexTensor::from_parts(1, 2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5], vec![0.0, 1.0, -1.0, 2.0, 0.25, 0.0]).unwrap();
        let mut wt = ConvWeights::zeros(1, 1, 1);
        wt.w_re[0] = 1.0;
        assert_eq!(complex_conv2d(&x, &wt).unwrap(), x);
        wt.w_re[0] = 0.0;
        wt.w_im[0] = 1.0;
        let y = complex_conv2d(&x, &wt).unwrap();
        for e in 0..x.len() {
            let z = Complex64::new(x.re[e], x.im[e]) * Complex64::new(0.0, 1.0);
            assert_eq!((y.re[e], y.im[e]), (z.re, z.im));
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = ComplexTensor::zeros(2, 4, 4);
        assert!(complex_conv2d(&x, &ConvWeights::zeros(1, 3, 3)).is_err());
    }

    #[test]
    fn amu_picks_largest_modulus_with_low_index_ties() {
        let a = ComplexTensor::from_parts(1, 1, 2, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let b = ComplexTensor::from_parts(1, 1, 2, vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let (out, idx) = amu_with_index(&[&a, &b]).unwrap();
        assert_eq!(out.get(0, 0, 0), Complex64::new(0.0, 2.0));
        // |1| == |j|: first branch wins
        assert_eq!(idx[1], 0);
        assert_eq!(out.get(0, 0, 1), Complex64::new(1.0, 0.0));
        assert!(amu(&[&a]).is_err());
        assert!(amu(&[&a, &ComplexTensor::zeros(1, 2, 1)]).is_err());
    }
}
