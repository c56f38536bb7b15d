//! Coarse-to-fine block matching on envelope images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ncc::{ncc_map_with, Fft2};
use crate::beamform::envelope;
use crate::field::MotionField;
use crate::geom::ScanGrid;
use crate::iq::{IQImage, RealImage};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    /// Window side per level (pixels), strictly decreasing.
    pub window_sizes: Vec<usize>,
    /// Fractional overlap of neighbouring windows.
    pub overlap: f64,
    /// Largest integer lag searched per level (pixels).
    pub search_margin: Vec<usize>,
    pub min_correlation: f64,
    /// Warp-and-match passes per level. Each pass measures the residual
    /// left by the previous one.
    pub refinements: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            window_sizes: vec![32, 16, 8],
            overlap: 0.5,
            search_margin: vec![8, 4, 2],
            min_correlation: 0.3,
            refinements: 3,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_sizes.is_empty() || self.window_sizes.iter().any(|&w| w < 3) {
            return Err(Error::invalid("window sizes must be >= 3 pixels"));
        }
        if self.window_sizes.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::invalid("window sizes must strictly decrease"));
        }
        if !(self.overlap >= 0.0 && self.overlap < 1.0) {
            return Err(Error::invalid("overlap must lie in [0, 1)"));
        }
        if self.search_margin.len() != self.window_sizes.len() {
            return Err(Error::invalid("one search margin per level"));
        }
        if !(0.0..=1.0).contains(&self.min_correlation) {
            return Err(Error::invalid("min_correlation must lie in [0, 1]"));
        }
        if self.refinements == 0 {
            return Err(Error::invalid("refinements must be >= 1"));
        }
        Ok(())
    }

    pub fn step(&self, window: usize) -> usize {
        ((window as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }
}

/// Windows of one level: origins laid out from zero along both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLattice {
    pub size: usize,
    pub step: usize,
    pub ny: usize,
    pub nx: usize,
}

impl WindowLattice {
    pub fn new(rows: usize, cols: usize, size: usize, step: usize) -> Option<Self> {
        if rows < size || cols < size {
            return None;
        }
        Some(Self {
            size,
            step,
            ny: (rows - size) / step + 1,
            nx: (cols - size) / step + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.ny * self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self, k: usize) -> (usize, usize) {
        ((k / self.nx) * self.step, (k % self.nx) * self.step)
    }

    /// Fractional pixel coordinate of window `k`'s centre.
    pub fn center(&self, k: usize) -> (f64, f64) {
        let (y0, x0) = self.origin(k);
        let half = (self.size as f64 - 1.0) / 2.0;
        (y0 as f64 + half, x0 as f64 + half)
    }

    /// Bilinear interpolation of per-window values at a pixel, clamped to
    /// the outermost centres.
    fn interpolate(&self, values: &RealImage, y: f64, x: f64) -> f64 {
        let half = (self.size as f64 - 1.0) / 2.0;
        values.bilinear((y - half) / self.step as f64, (x - half) / self.step as f64)
    }
}

/// Dense per-pixel displacement (pixels) along rows and columns.
#[derive(Debug, Clone, PartialEq)]
struct DenseField {
    dy: RealImage,
    dx: RealImage,
}

impl DenseField {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            dy: RealImage::zeros(rows, cols),
            dx: RealImage::zeros(rows, cols),
        }
    }
}

/// `b(y + dy, x + dx)` with bilinear sampling, edges clamped.
fn warp(b: &RealImage, field: &DenseField) -> RealImage {
    RealImage::from_fn(b.rows, b.cols, |i, j| {
        let dy = field.dy.at(i, j);
        let dx = field.dx.at(i, j);
        if dy == 0.0 && dx == 0.0 {
            b.at(i, j)
        } else {
            b.bilinear(i as f64 + dy, j as f64 + dx)
        }
    })
}

fn block(img: &RealImage, y0: usize, x0: usize, size: usize) -> RealImage {
    RealImage::from_fn(size, size, |i, j| img.at(y0 + i, x0 + j))
}

/// Per-window displacement in pixels with its validity.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimates {
    pub lattice: WindowLattice,
    pub dy: Vec<f64>,
    pub dx: Vec<f64>,
    pub correlation: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Pixel-domain coarse-to-fine estimation between two real images.
pub fn track_images(a: &RealImage, b: &RealImage, cfg: &TrackConfig) -> Result<WindowEstimates> {
    cfg.validate()?;
    if a.shape() != b.shape() {
        return Err(Error::shape("tracked images differ in size"));
    }
    let (rows, cols) = a.shape();
    let mut dense = DenseField::zeros(rows, cols);
    let mut last: Option<WindowEstimates> = None;
    for (level, &size) in cfg.window_sizes.iter().enumerate() {
        let Some(lattice) = WindowLattice::new(rows, cols, size, cfg.step(size)) else {
            continue;
        };
        let fft = Fft2::new(size, size);
        let margin = cfg.search_margin[level];
        for _ in 0..cfg.refinements {
            let warped = warp(b, &dense);
            let results: Vec<(f64, f64, f64, bool)> = (0..lattice.len())
                .into_par_iter()
                .map(|k| {
                    let (y0, x0) = lattice.origin(k);
                    let (cy, cx) = lattice.center(k);
                    let py = dense.dy.bilinear(cy, cx);
                    let px = dense.dx.bilinear(cy, cx);
                    let wa = block(a, y0, x0, size);
                    let wb = block(&warped, y0, x0, size);
                    match ncc_map_with(&wa, &wb, &fft) {
                        Ok(surface) => {
                            let (ry, rx, c) = surface.refined_peak(margin);
                            if c >= cfg.min_correlation {
                                (py + ry, px + rx, c, true)
                            } else {
                                (py, px, c, false)
                            }
                        }
                        Err(_) => (py, px, 0.0, false),
                    }
                })
                .collect();
            let est = WindowEstimates {
                dy: results.iter().map(|r| r.0).collect(),
                dx: results.iter().map(|r| r.1).collect(),
                correlation: results.iter().map(|r| r.2).collect(),
                valid: results.iter().map(|r| r.3).collect(),
                lattice: lattice.clone(),
            };
            let gy = RealImage::new(est.lattice.ny, est.lattice.nx, est.dy.clone())?;
            let gx = RealImage::new(est.lattice.ny, est.lattice.nx, est.dx.clone())?;
            dense = DenseField {
                dy: RealImage::from_fn(rows, cols, |i, j| est.lattice.interpolate(&gy, i as f64, j as f64)),
                dx: RealImage::from_fn(rows, cols, |i, j| est.lattice.interpolate(&gx, i as f64, j as f64)),
            };
            last = Some(est);
        }
    }
    last.ok_or_else(|| Error::invalid("image smaller than every tracking window"))
}

/// Converts pixel displacements at window centres into Cartesian metres:
/// the vector joins the centre's position to the displaced position.
pub fn estimates_to_field(est: &WindowEstimates, grid: &ScanGrid, interframe_dt: f64) -> Result<MotionField> {
    let n = est.lattice.len();
    let mut points = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let (cy, cx) = est.lattice.center(k);
        let p = grid.fractional_to_cartesian(cy, cx);
        let q = grid.fractional_to_cartesian(cy + est.dy[k], cx + est.dx[k]);
        points.push(p);
        vectors.push(if est.dy[k] == 0.0 && est.dx[k] == 0.0 {
            [0.0, 0.0]
        } else {
            [q[0] - p[0], q[1] - p[1]]
        });
    }
    MotionField::new(points, vectors, est.valid.clone(), interframe_dt)
}

/// Motion from `frame_a` to `frame_b` at the final-level window centres.
pub fn track_pair(frame_a: &IQImage, frame_b: &IQImage, cfg: &TrackConfig) -> Result<MotionField> {
    if frame_a.grid != frame_b.grid {
        return Err(Error::shape("tracked frames must share one grid"));
    }
    let est = track_images(&envelope(frame_a), &envelope(frame_b), cfg)?;
    estimates_to_field(&est, &frame_a.grid, frame_b.frame_time - frame_a.frame_time)
}

/// [`track_pair`] over consecutive frames.
pub fn track_sequence(frames: &[IQImage], cfg: &TrackConfig) -> Result<Vec<MotionField>> {
    if frames.len() < 2 {
        return Err(Error::invalid("tracking needs at least two frames"));
    }
    frames
        .par_windows(2)
        .map(|p| track_pair(&p[0], &p[1], cfg))
        .collect()
}
