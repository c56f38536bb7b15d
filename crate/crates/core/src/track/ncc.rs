//! Circular normalized cross-correlation through the FFT, and parabolic
//! peak refinement.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::iq::RealImage;
use crate::{Error, Result};

/// 2-D FFT plans for one block size.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            col_fwd: planner.plan_fft_forward(rows),
            row_inv: planner.plan_fft_inverse(cols),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        for r in data.chunks_exact_mut(self.cols) {
            row.process(r);
        }
        let mut column = vec![Complex::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = data[r * self.cols + c];
            }
            col.process(&mut column);
            for r in 0..self.rows {
                data[r * self.cols + c] = column[r];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex<f64>]) {
        self.transform(data, &self.row_fwd, &self.col_fwd);
    }

    /// Unnormalized inverse.
    pub fn inverse(&self, data: &mut [Complex<f64>]) {
        self.transform(data, &self.row_inv, &self.col_inv);
    }
}

/// NCC for every circular lag. `values.at(ly, lx)` holds lag
/// `(wrap(ly), wrap(lx))` where indices above half the size stand for
/// negative lags.
#[derive(Debug, Clone, PartialEq)]
pub struct NccSurface {
    pub values: RealImage,
}

impl NccSurface {
    pub fn rows(&self) -> usize {
        self.values.rows
    }

    pub fn cols(&self) -> usize {
        self.values.cols
    }

    /// Value at signed lag `(ly, lx)`, taken circularly.
    pub fn at_lag(&self, ly: isize, lx: isize) -> f64 {
        let r = ly.rem_euclid(self.rows() as isize) as usize;
        let c = lx.rem_euclid(self.cols() as isize) as usize;
        self.values.at(r, c)
    }

    /// Integer argmax over `|ly|, |lx| <= margin`. Ties go to the smallest
    /// lag magnitude, then to the first in scan order.
    pub fn peak(&self, margin: usize) -> (isize, isize, f64) {
        let my = (margin as isize).min((self.rows() as isize - 1) / 2);
        let mx = (margin as isize).min((self.cols() as isize - 1) / 2);
        let mut best: (isize, isize, f64) = (0, 0, self.at_lag(0, 0));
        for ly in -my..=my {
            for lx in -mx..=mx {
                let v = self.at_lag(ly, lx);
                let closer = ly.abs() + lx.abs() < best.0.abs() + best.1.abs();
                if v > best.2 || (v == best.2 && closer) {
                    best = (ly, lx, v);
                }
            }
        }
        best
    }

    /// Integer peak refined per axis with [`subpixel_peak`].
    pub fn refined_peak(&self, margin: usize) -> (f64, f64, f64) {
        let (ly, lx, v) = self.peak(margin);
        let dy = subpixel_peak(self.at_lag(ly - 1, lx), v, self.at_lag(ly + 1, lx));
        let dx = subpixel_peak(self.at_lag(ly, lx - 1), v, self.at_lag(ly, lx + 1));
        (ly as f64 + dy, lx as f64 + dx, v)
    }
}

/// Zero-mean circular NCC of two equally sized blocks: the value at lag `l`
/// compares `a(p)` with `b(p + l)`, so `b(p) = a(p - s)` peaks at `l = s`.
pub fn ncc_map_with(a: &RealImage, b: &RealImage, fft: &Fft2) -> Result<NccSurface> {
    if a.shape() != b.shape() {
        return Err(Error::shape("NCC blocks differ in size"));
    }
    if a.shape() != (fft.rows, fft.cols) {
        return Err(Error::shape("FFT plan does not match the block size"));
    }
    let n = a.len() as f64;
    let centred = |img: &RealImage| -> (Vec<Complex<f64>>, f64) {
        let mean = img.data.iter().sum::<f64>() / n;
        let v: Vec<Complex<f64>> = img.data.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
        let energy = v.iter().map(|z| z.re * z.re).sum::<f64>();
        (v, energy)
    };
    let (mut fa, ea) = centred(a);
    let (mut fb, eb) = centred(b);
    let denom = (ea * eb).sqrt();
    if !(denom > 0.0) || ea <= f64::EPSILON * n || eb <= f64::EPSILON * n {
        return Err(Error::Degenerate("NCC of a constant block".into()));
    }
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    fft.inverse(&mut fa);
    let scale = 1.0 / (n * denom);
    Ok(NccSurface {
        values: RealImage {
            rows: a.rows,
            cols: a.cols,
            data: fa.iter().map(|z| z.re * scale).collect(),
        },
    })
}

pub fn ncc_map(a: &RealImage, b: &RealImage) -> Result<NccSurface> {
    ncc_map_with(a, b, &Fft2::new(a.rows, a.cols))
}

const SUBPIXEL_SNAP: f64 = 1e-9;

/// Vertex of the parabola through `(-1, c_minus), (0, c0), (1, c_plus)`,
/// clamped to `[-0.5, 0.5]`; zero when the three values are collinear.
pub fn subpixel_peak(c_minus: f64, c0: f64, c_plus: f64) -> f64 {
    let den = c_minus - 2.0 * c0 + c_plus;
    if !(den.abs() > 1e-15) {
        return 0.0;
    }
    let d = ((c_minus - c_plus) / (2.0 * den)).clamp(-0.5, 0.5);
    if d.abs() < SUBPIXEL_SNAP {
        0.0
    } else {
        d
    }
}
