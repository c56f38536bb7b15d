//! Delay-and-sum on baseband channel data, compounding and B-mode display.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{ProbeConfig, ScanGrid};
use crate::iq::{IQImage, RealImage};
use crate::sim::{AcquisitionStack, RawChannelData};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Apodization {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DASConfig {
    /// Receive aperture width is `depth / f_number`.
    pub f_number: f64,
    pub apodization: Apodization,
    pub interpolation: Interpolation,
    /// Defaults to the probe centre frequency.
    pub phase_rotation_frequency: Option<f64>,
}

impl Default for DASConfig {
    fn default() -> Self {
        Self {
            f_number: 1.0,
            apodization: Apodization::Hann,
            interpolation: Interpolation::Linear,
            phase_rotation_frequency: None,
        }
    }
}

impl DASConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_number > 0.0 && self.f_number.is_finite()) {
            return Err(Error::invalid("f_number must be > 0"));
        }
        if let Some(f) = self.phase_rotation_frequency {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::invalid("phase rotation frequency must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Receive weights and delays of one pixel, shared across transmits.
struct RxTerm {
    element: usize,
    /// One-way receive delay (s).
    delay: f64,
    /// `weight * exp(j 2 pi f tau_rx)`.
    phasor: Complex64,
}

fn receive_terms(p: [f64; 2], elements: &[f64], c: f64, cfg: &DASConfig, f_rot: f64, out: &mut Vec<RxTerm>) {
    out.clear();
    let aperture = p[1] / cfg.f_number;
    let half = aperture / 2.0;
    for (e, &xe) in elements.iter().enumerate() {
        let dx = p[0] - xe;
        if dx.abs() > half {
            continue;
        }
        let weight = match cfg.apodization {
            Apodization::Rectangular => 1.0,
            Apodization::Hann => (PI * dx / aperture).cos().powi(2),
        };
        if weight == 0.0 {
            continue;
        }
        let delay = dx.hypot(p[1]) / c;
        out.push(RxTerm {
            element: e,
            delay,
            phasor: Complex64::from_polar(weight, 2.0 * PI * f_rot * delay),
        });
    }
}

fn check_raw<'a>(raw: &'a RawChannelData, probe: &ProbeConfig) -> Result<&'a [Complex64]> {
    let data = raw
        .baseband()
        .ok_or_else(|| Error::invalid("DAS needs demodulated baseband channel data"))?;
    if raw.elements != probe.element_count || data.len() != raw.elements * raw.samples_per_element {
        return Err(Error::shape("channel data does not match the probe"));
    }
    Ok(data)
}

/// Beamforms several transmits onto `grid`, one image per transmit.
///
/// Receive geometry is evaluated once per pixel and reused for every
/// transmit; a single-transmit call gives the same bits as a batched one.
pub fn das_beamform_many(
    raws: &[&RawChannelData],
    probe: &ProbeConfig,
    grid: &ScanGrid,
    cfg: &DASConfig,
) -> Result<Vec<Vec<Complex64>>> {
    probe.validate()?;
    grid.validate()?;
    cfg.validate()?;
    let data: Vec<&[Complex64]> = raws.iter().map(|r| check_raw(r, probe)).collect::<Result<_>>()?;
    let c = probe.sound_speed;
    let f_rot = cfg.phase_rotation_frequency.unwrap_or(probe.center_frequency);
    let elements = probe.element_positions();
    let (h, w) = grid.shape();
    let n_tx = raws.len();

    // rows of the grid are independent
    let rows: Vec<Vec<Vec<Complex64>>> = (0..h)
        .into_par_iter()
        .map(|i| {
            let mut terms = Vec::with_capacity(elements.len());
            let mut row = vec![vec![Complex64::new(0.0, 0.0); w]; n_tx];
            for j in 0..w {
                let p = grid.grid_to_cartesian(i, j).expect("node in range");
                receive_terms(p, &elements, c, cfg, f_rot, &mut terms);
                for (k, raw) in raws.iter().enumerate() {
                    let tau_tx = raw.wave.transmit_delay(p, c);
                    let tx_phase = Complex64::from_polar(1.0, 2.0 * PI * f_rot * tau_tx);
                    let ns = raw.samples_per_element;
                    let fs = raw.sampling_frequency;
                    let last = (ns - 1) as f64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in &terms {
                        let u = (tau_tx + t.delay - raw.t0) * fs;
                        if !(u >= 0.0 && u <= last) {
                            continue;
                        }
                        let n0 = u.floor();
                        let frac = u - n0;
                        let base = t.element * ns + n0 as usize;
                        let trace = data[k];
                        let s0 = trace[base];
                        let sample = if frac > 0.0 {
                            s0 + (trace[base + 1] - s0) * frac
                        } else {
                            s0
                        };
                        acc += sample * t.phasor;
                    }
                    row[k][j] = acc * tx_phase;
                }
            }
            row
        })
        .collect();

    Ok((0..n_tx)
        .map(|k| rows.iter().flat_map(|r| r[k].iter().copied()).collect())
        .collect())
}

/// Single-transmit DAS. Delays falling outside the recorded window
/// contribute nothing.
pub fn das_beamform(raw: &RawChannelData, probe: &ProbeConfig, grid: &ScanGrid, cfg: &DASConfig) -> Result<IQImage> {
    let mut out = das_beamform_many(&[raw], probe, grid, cfg)?;
    IQImage::new(*grid, out.pop().expect("one image"), 0.0)
}

/// One image per transmit, stamped with the transmit's firing time.
pub fn beamform_stack(
    stack: &AcquisitionStack,
    probe: &ProbeConfig,
    grid: &ScanGrid,
    cfg: &DASConfig,
) -> Result<Vec<IQImage>> {
    let raws: Vec<&RawChannelData> = stack.transmits.iter().collect();
    das_beamform_many(&raws, probe, grid, cfg)?
        .into_iter()
        .zip(&stack.times)
        .map(|(samples, &t)| IQImage::new(*grid, samples, t))
        .collect()
}

/// Element-wise complex mean; the frame time is the mean of the inputs'.
pub fn compound(images: &[IQImage]) -> Result<IQImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::Empty("nothing to compound".into()))?;
    if images.iter().any(|im| im.grid != first.grid) {
        return Err(Error::shape("compounded images must share one grid"));
    }
    let n = images.len() as f64;
    let samples = (0..first.samples.len())
        .map(|k| images.iter().map(|im| im.samples[k]).sum::<Complex64>() / n)
        .collect();
    let frame_time = images.iter().map(|im| im.frame_time).sum::<f64>() / n;
    IQImage::new(first.grid, samples, frame_time)
}

pub fn envelope(image: &IQImage) -> RealImage {
    RealImage {
        rows: image.rows(),
        cols: image.cols(),
        data: image.samples.iter().map(|z| z.norm()).collect(),
    }
}

/// Log-compressed envelope in dB relative to the image maximum, clipped to
/// `[-dynamic_range_db, 0]`.
pub fn bmode(image: &IQImage, dynamic_range_db: f64) -> Result<RealImage> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::invalid("dynamic range must be > 0 dB"));
    }
    let env = envelope(image);
    let peak = env.max();
    if !(peak > 0.0) {
        return Err(Error::Degenerate("B-mode of an all-zero image".into()));
    }
    Ok(env.map(|v| {
        if v <= 0.0 {
            -dynamic_range_db
        } else {
            (20.0 * (v / peak).log10()).clamp(-dynamic_range_db, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{demodulate, simulate_transmit, DemodFilter, DivergingWave, ScattererMedium, SimOptions, TimeWindow};

    fn grid() -> ScanGrid {
        ScanGrid::new((0.02, 0.04), (-0.25, 0.25), 40, 24).unwrap()
    }

    fn baseband(medium: &ScattererMedium, angle: f64) -> RawChannelData {
        let probe = ProbeConfig::default();
        let wave = DivergingWave::for_probe(&probe, angle, crate::sim::DEFAULT_SECTOR_WIDTH).unwrap();
        let window = TimeWindow::covering(&grid(), &probe, &wave, crate::sim::default_padding(&probe));
        let rf = simulate_transmit(medium, &probe, &wave, &window, &SimOptions::default()).unwrap();
        demodulate(&rf, &probe, &DemodFilter::for_probe(&probe)).unwrap()
    }

    #[test]
    fn zero_channels_give_zero_image() {
        let raw = baseband(&ScattererMedium::empty(), 0.0);
        let img = das_beamform(&raw, &ProbeConfig::default(), &grid(), &DASConfig::default()).unwrap();
        assert!(img.samples.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn peak_falls_on_the_scatterer() {
        let g = grid();
        let target = g.grid_to_cartesian(17, 9).unwrap();
        let medium = ScattererMedium::new(vec![target], vec![1.0]).unwrap();
        for angle in [-20f64, 0.0, 20.0] {
            let raw = baseband(&medium, angle.to_radians());
            let img = das_beamform(&raw, &ProbeConfig::default(), &g, &DASConfig::default()).unwrap();
            let env = envelope(&img);
            let k = (0..env.len()).max_by(|&a, &b| env.data[a].total_cmp(&env.data[b])).unwrap();
            let (i, j) = (k / g.n_angle, k % g.n_angle);
            assert!((i as i64 - 17).abs() <= 1 && (j as i64 - 9).abs() <= 1, "{angle}: {i},{j}");
        }
    }

    #[test]
    fn scaling_channels_scales_image() {
        let medium = ScattererMedium::new(vec![[0.003, 0.03]], vec![1.0]).unwrap();
        let raw = baseband(&medium, 0.1);
        let doubled = raw.scaled(2.0);
        let probe = ProbeConfig::default();
        let a = das_beamform(&raw, &probe, &grid(), &DASConfig::default()).unwrap();
        let b = das_beamform(&doubled, &probe, &grid(), &DASConfig::default()).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(*x * 2.0, *y);
        }
    }

    #[test]
    fn compound_is_a_mean() {
        let g = ScanGrid::new((0.01, 0.02), (-0.1, 0.1), 2, 2).unwrap();
        let a = IQImage::new(g, vec![Complex64::new(1.0, 2.0); 4], 0.0).unwrap();
        let c = compound(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(c, a);
        let neg = a.scaled(-1.0);
        let z = compound(&[a.clone(), neg]).unwrap();
        assert!(z.samples.iter().all(|v| v.norm() == 0.0));
        assert!(compound(&[]).is_err());
        let other = IQImage::zeros(ScanGrid::new((0.01, 0.03), (-0.1, 0.1), 2, 2).unwrap(), 0.0);
        assert!(compound(&[a, other]).is_err());
    }

    #[test]
    fn envelope_and_bmode_values() {
        let g = ScanGrid::new((0.01, 0.02), (-0.1, 0.1), 1, 4).unwrap();
        let img = IQImage::new(
            g,
            vec![
                Complex64::new(3.0, 4.0),
                Complex64::new(-2.0, 0.0),
                Complex64::new(5e-3, 0.0),
                Complex64::new(5e-6, 0.0),
            ],
            0.0,
        )
        .unwrap();
        let env = envelope(&img);
        assert_eq!(env.data[0], 5.0);
        assert_eq!(env.data[1], 2.0);
        let db = bmode(&img, 60.0).unwrap();
        assert_eq!(db.data[0], 0.0);
        assert!((db.data[2] + 60.0).abs() < 1e-9);
        assert_eq!(db.data[3], -60.0);
        assert!(bmode(&IQImage::zeros(g, 0.0), 60.0).is_err());
    }
}
