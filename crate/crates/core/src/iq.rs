//! Complex I/Q images and real-valued images on a scan grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geom::ScanGrid;
use crate::{Error, Result};

/// Beamformed or reconstructed I/Q image, row-major `n_depth x n_angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct IQImage {
    pub grid: ScanGrid,
    pub samples: Vec<Complex64>,
    /// Acquisition time of the frame (s).
    pub frame_time: f64,
}

impl IQImage {
    pub fn new(grid: ScanGrid, samples: Vec<Complex64>, frame_time: f64) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::shape(format!(
                "{} samples for a {}x{} grid",
                samples.len(),
                grid.n_depth,
                grid.n_angle
            )));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("I/Q samples must be finite"));
        }
        Ok(Self {
            grid,
            samples,
            frame_time,
        })
    }

    pub fn zeros(grid: ScanGrid, frame_time: f64) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
            frame_time,
        }
    }

    pub fn rows(&self) -> usize {
        self.grid.n_depth
    }

    pub fn cols(&self) -> usize {
        self.grid.n_angle
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.samples[i * self.grid.n_angle + j]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z * factor).collect(),
            frame_time: self.frame_time,
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Mirror columns `j -> n_angle - 1 - j`.
    pub fn flipped_lateral(&self) -> Self {
        let (h, w) = self.grid.shape();
        let mut out = self.samples.clone();
        for i in 0..h {
            for j in 0..w {
                out[i * w + j] = self.samples[i * w + (w - 1 - j)];
            }
        }
        Self {
            grid: self.grid,
            samples: out,
            frame_time: self.frame_time,
        }
    }
}

/// Real-valued image (envelope, dB map, template intensities), row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{cols} image",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn flipped_lateral(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.at(i, self.cols - 1 - j))
    }

    /// Bilinear sample at fractional `(y, x)`, edges clamped.
    pub fn bilinear(&self, y: f64, x: f64) -> f64 {
        let yc = y.clamp(0.0, (self.rows - 1) as f64);
        let xc = x.clamp(0.0, (self.cols - 1) as f64);
        let y0 = yc.floor() as usize;
        let x0 = xc.floor() as usize;
        let fy = yc - y0 as f64;
        let fx = xc - x0 as f64;
        let y1 = (y0 + 1).min(self.rows - 1);
        let x1 = (x0 + 1).min(self.cols - 1);
        let top = if fx == 0.0 {
            self.at(y0, x0)
        } else {
            self.at(y0, x0) * (1.0 - fx) + self.at(y0, x1) * fx
        };
        if fy == 0.0 {
            return top;
        }
        let bottom = if fx == 0.0 {
            self.at(y1, x0)
        } else {
            self.at(y1, x0) * (1.0 - fx) + self.at(y1, x1) * fx
        };
        top * (1.0 - fy) + bottom * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iq_image_checks_shape_and_finiteness() {
        let g = ScanGrid::new((0.01, 0.02), (-0.1, 0.1), 2, 3).unwrap();
        assert!(IQImage::new(g, vec![Complex64::new(0.0, 0.0); 5], 0.0).is_err());
        let mut s = vec![Complex64::new(1.0, 0.0); 6];
        s[2].im = f64::NAN;
        assert!(IQImage::new(g, s, 0.0).is_err());
    }

    #[test]
    fn bilinear_is_exact_on_nodes() {
        let img = RealImage::from_fn(4, 5, |i, j| (i * 10 + j) as f64);
        for i in 0..4 {
            for j in 0..5 {
                assert_eq!(img.bilinear(i as f64, j as f64), img.at(i, j));
            }
        }
        assert!((img.bilinear(1.5, 2.5) - 17.5).abs() < 1e-12);
    }
}
