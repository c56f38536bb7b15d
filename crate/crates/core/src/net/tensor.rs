use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::iq::IQImage;
use crate::{Error, Result};

/// `(channels, h, w)` complex tensor stored as separate real and imaginary
/// planes, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTensor {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexTensor {
    pub fn zeros(channels: usize, h: usize, w: usize) -> Self {
        let n = channels * h * w;
        Self {
            channels,
            h,
            w,
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn from_parts(channels: usize, h: usize, w: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n = channels * h * w;
        if re.len() != n || im.len() != n {
            return Err(Error::shape(format!(
                "tensor ({channels},{h},{w}) needs {n} values, got {} / {}",
                re.len(),
                im.len()
            )));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor values must be finite"));
        }
        Ok(Self { channels, h, w, re, im })
    }

    pub fn from_complex(channels: usize, h: usize, w: usize, values: &[Complex64]) -> Result<Self> {
        Self::from_parts(
            channels,
            h,
            w,
            values.iter().map(|z| z.re).collect(),
            values.iter().map(|z| z.im).collect(),
        )
    }

    /// Stacks same-grid images as channels.
    pub fn from_images(images: &[&IQImage]) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::Empty("no images to stack".into()))?;
        if images.iter().any(|im| im.grid != first.grid) {
            return Err(Error::shape("stacked images must share one grid"));
        }
        let values: Vec<Complex64> = images.iter().flat_map(|im| im.samples.iter().copied()).collect();
        Self::from_complex(images.len(), first.rows(), first.cols(), &values)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.h, self.w)
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> Complex64 {
        let k = (c * self.h + y) * self.w + x;
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: Complex64) {
        let k = (c * self.h + y) * self.w + x;
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i)).collect()
    }

    pub fn channel(&self, c: usize) -> Self {
        let n = self.plane_len();
        Self {
            channels: 1,
            h: self.h,
            w: self.w,
            re: self.re[c * n..(c + 1) * n].to_vec(),
            im: self.im[c * n..(c + 1) * n].to_vec(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            re: self.re.iter().map(|v| v * factor).collect(),
            im: self.im.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Channel-wise concatenation.
    pub fn concat(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Empty("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.h != first.h || p.w != first.w) {
            return Err(Error::shape("concatenated tensors differ in spatial size"));
        }
        let mut out = Self::zeros(0, first.h, first.w);
        for p in parts {
            out.channels += p.channels;
            out.re.extend_from_slice(&p.re);
            out.im.extend_from_slice(&p.im);
        }
        Ok(out)
    }

    pub fn max_modulus(&self) -> f64 {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.hypot(*i))
            .fold(0.0, f64::max)
    }

    /// Mean over channels, as a single-channel tensor.
    pub fn channel_mean(&self) -> Self {
        let n = self.plane_len();
        let mut out = Self::zeros(1, self.h, self.w);
        for c in 0..self.channels {
            for k in 0..n {
                out.re[k] += self.re[c * n + k];
                out.im[k] += self.im[c * n + k];
            }
        }
        let inv = 1.0 / self.channels.max(1) as f64;
        out.scaled(inv)
    }

    pub fn to_image(&self, grid: crate::geom::ScanGrid, frame_time: f64) -> Result<IQImage> {
        if self.channels != 1 {
            return Err(Error::shape("only single-channel tensors convert to images"));
        }
        IQImage::new(grid, self.to_complex(), frame_time)
    }
}
