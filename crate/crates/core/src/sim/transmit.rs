//! Linear point-scatterer pulse-echo model for steered diverging waves.
//!
//! For a scatterer `s` and receive element `e` the echo is
//! `RC_s * a_tx(s) * a_rx(e, s) * pulse(t - tau)` with
//! `tau = (|s - vs| - |vs|) / c + |s - e| / c`, `vs` the virtual source.
//! Spreading is cylindrical (`1 / sqrt(distance)`) both ways and the
//! receive element has a cosine directivity cut off past 80 degrees.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::medium::ScattererMedium;
use crate::geom::{ProbeConfig, ScanGrid};
use crate::{Error, Result};

/// Steered diverging wave radiating from a virtual point source behind the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergingWave {
    /// Tilt (rad).
    pub angle: f64,
    /// Virtual source position (m), `z < 0`.
    pub virtual_source: [f64; 2],
}

impl DivergingWave {
    /// Source at `distance` behind the array centre along the tilted axis.
    pub fn new(angle: f64, distance: f64) -> Result<Self> {
        if !(angle.abs() < PI / 2.0) {
            return Err(Error::invalid("tilt must lie in (-pi/2, pi/2)"));
        }
        if !(distance > 0.0) {
            return Err(Error::invalid("virtual source distance must be > 0"));
        }
        let (s, c) = angle.sin_cos();
        Ok(Self {
            angle,
            virtual_source: [-distance * s, -distance * c],
        })
    }

    /// Standard construction for `probe`: the source sees the aperture under
    /// the full `sector_width` opening.
    pub fn for_probe(probe: &ProbeConfig, angle: f64, sector_width: f64) -> Result<Self> {
        Self::new(angle, virtual_source_distance(probe, sector_width))
    }

    pub fn source_distance(&self) -> f64 {
        self.virtual_source[0].hypot(self.virtual_source[1])
    }

    /// One-way transmit delay to `p` (s); zero at the array centre.
    #[inline]
    pub fn transmit_delay(&self, p: [f64; 2], sound_speed: f64) -> f64 {
        let d = (p[0] - self.virtual_source[0]).hypot(p[1] - self.virtual_source[1]);
        (d - self.source_distance()) / sound_speed
    }
}

/// `aperture / (2 tan(sector / 2))`.
pub fn virtual_source_distance(probe: &ProbeConfig, sector_width: f64) -> f64 {
    probe.aperture_width() / (2.0 * (sector_width / 2.0).tan())
}

/// Opening used for every diverging wave in this crate.
pub const DEFAULT_SECTOR_WIDTH: f64 = PI / 2.0;

/// Gaussian-modulated cosine tuned to the probe band.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub center_frequency: f64,
    /// Standard deviation of the Gaussian envelope (s).
    pub sigma: f64,
    /// Pulse support is `[-half_duration, half_duration]` (s).
    pub half_duration: f64,
}

impl Pulse {
    /// Envelope width chosen so the spectrum is 6 dB down at the band edges.
    pub fn for_probe(probe: &ProbeConfig) -> Self {
        let half_band = probe.bandwidth_hz() / 2.0;
        let sigma = (2.0 * std::f64::consts::LN_2).sqrt() / (2.0 * PI * half_band);
        Self {
            center_frequency: probe.center_frequency,
            sigma,
            half_duration: 3.5 * sigma,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t.abs() > self.half_duration {
            return 0.0;
        }
        (-0.5 * (t / self.sigma).powi(2)).exp() * (2.0 * PI * self.center_frequency * t).cos()
    }
}

/// Pulse samples tabulated on a grid `oversampling` times finer than the
/// channel sampling, with linear interpolation in between.
struct PulseTable {
    values: Vec<f64>,
    slopes: Vec<f64>,
    oversampling: usize,
    /// Half support in channel samples.
    half_samples: f64,
    centre: usize,
}

impl PulseTable {
    fn new(pulse: &Pulse, fs: f64, oversampling: usize) -> Self {
        let half_samples = pulse.half_duration * fs;
        let k = (half_samples * oversampling as f64).ceil() as usize + 1;
        let step = 1.0 / (fs * oversampling as f64);
        let values: Vec<f64> = (0..=2 * k + 1)
            .map(|i| pulse.value((i as f64 - k as f64) * step))
            .collect();
        let mut slopes: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        slopes.push(0.0);
        Self {
            values,
            slopes,
            oversampling,
            half_samples,
            centre: k,
        }
    }

    /// Adds `amp * pulse(n - u)` (in samples) into `trace` for every `n` in
    /// the pulse support.
    #[inline]
    fn deposit(&self, trace: &mut [f64], u: f64, amp: f64) {
        let n_lo = (u - self.half_samples).ceil().max(0.0);
        let n_hi = (u + self.half_samples).floor().min(trace.len() as f64 - 1.0);
        if n_hi < n_lo {
            return;
        }
        let os = self.oversampling as f64;
        let base = (n_lo - u) * os + self.centre as f64;
        let ib = base.floor();
        let frac = base - ib;
        let mut idx = ib as usize;
        let (lo, hi) = (n_lo as usize, n_hi as usize);
        for sample in &mut trace[lo..=hi] {
            *sample += amp * (self.values[idx] + frac * self.slopes[idx]);
            idx += self.oversampling;
        }
    }
}

const TABLE_OVERSAMPLING: usize = 128;
const DIRECTIVITY_CUTOFF: f64 = 80.0 * PI / 180.0;

/// Recording window of one transmit shared by all elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    /// Time of sample 0 (s).
    pub t0: f64,
    pub n_samples: usize,
}

impl TimeWindow {
    /// Smallest window holding every two-way delay from the grid to the
    /// array, padded by `padding` seconds on both sides.
    pub fn covering(grid: &ScanGrid, probe: &ProbeConfig, wave: &DivergingWave, padding: f64) -> Self {
        let c = probe.sound_speed;
        let elements = probe.element_positions();
        let (h, w) = grid.shape();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        // Path lengths increase along every ray, so the extrema lie on the rim.
        let mut visit = |i: usize, j: usize| {
            let p = grid.grid_to_cartesian(i, j).expect("in-range node");
            let tx = wave.transmit_delay(p, c);
            for &x in &elements {
                let t = tx + (p[0] - x).hypot(p[1]) / c;
                lo = lo.min(t);
                hi = hi.max(t);
            }
        };
        for j in 0..w {
            visit(0, j);
            visit(h - 1, j);
        }
        for i in 0..h {
            visit(i, 0);
            visit(i, w - 1);
        }
        let fs = probe.sampling_frequency;
        let t0 = ((lo - padding) * fs).floor() / fs;
        let n_samples = (((hi + padding) - t0) * fs).ceil() as usize + 1;
        Self { t0, n_samples }
    }

    pub fn time(&self, n: usize, fs: f64) -> f64 {
        self.t0 + n as f64 / fs
    }
}

/// Padding that keeps full pulses and demodulation filter tails in the window.
pub fn default_padding(probe: &ProbeConfig) -> f64 {
    let pulse = Pulse::for_probe(probe);
    pulse.half_duration + 24.0 / probe.sampling_frequency
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSamples {
    /// Real RF, element-major.
    Rf(Vec<f64>),
    /// Complex baseband, element-major.
    Baseband(Vec<Complex64>),
}

/// Per-element echoes of one transmit, element-major `elements x samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChannelData {
    pub elements: usize,
    pub samples_per_element: usize,
    pub data: ChannelSamples,
    pub wave: DivergingWave,
    /// Time of sample 0 relative to the transmit (s).
    pub t0: f64,
    pub sampling_frequency: f64,
}

impl RawChannelData {
    pub fn is_baseband(&self) -> bool {
        matches!(self.data, ChannelSamples::Baseband(_))
    }

    pub fn rf(&self) -> Option<&[f64]> {
        match &self.data {
            ChannelSamples::Rf(v) => Some(v),
            ChannelSamples::Baseband(_) => None,
        }
    }

    pub fn baseband(&self) -> Option<&[Complex64]> {
        match &self.data {
            ChannelSamples::Baseband(v) => Some(v),
            ChannelSamples::Rf(_) => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let data = match &self.data {
            ChannelSamples::Rf(v) => ChannelSamples::Rf(v.iter().map(|x| x * factor).collect()),
            ChannelSamples::Baseband(v) => {
                ChannelSamples::Baseband(v.iter().map(|x| x * factor).collect())
            }
        };
        Self {
            data,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Cosine receive directivity with a hard cutoff at 80 degrees.
    pub element_directivity: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            element_directivity: true,
        }
    }
}

/// RF echoes of one transmit.
pub fn simulate_transmit(
    medium: &ScattererMedium,
    probe: &ProbeConfig,
    wave: &DivergingWave,
    window: &TimeWindow,
    opts: &SimOptions,
) -> Result<RawChannelData> {
    let mut out = simulate_transmits(medium, probe, &[(*wave, *window)], opts)?;
    Ok(out.pop().expect("one transmit"))
}

/// RF echoes of several transmits that all see the same medium state.
///
/// Receive paths are computed once per scatterer and element and reused by
/// every transmit, which makes frozen-time references cheap. The result for
/// each transmit is bit-identical to a standalone [`simulate_transmit`].
pub fn simulate_transmits(
    medium: &ScattererMedium,
    probe: &ProbeConfig,
    transmits: &[(DivergingWave, TimeWindow)],
    opts: &SimOptions,
) -> Result<Vec<RawChannelData>> {
    probe.validate()?;
    if medium.positions.len() != medium.reflectivities.len() {
        return Err(Error::shape("medium positions and reflectivities differ"));
    }
    let c = probe.sound_speed;
    let fs = probe.sampling_frequency;
    let pulse = Pulse::for_probe(probe);
    let table = PulseTable::new(&pulse, fs, TABLE_OVERSAMPLING);
    let elements = probe.element_positions();
    let n_tx = transmits.len();

    // Per transmit: transmit delay (in samples, relative to the window) and
    // amplitude, per scatterer.
    let tx_terms: Vec<Vec<(f64, f64)>> = transmits
        .iter()
        .map(|(wave, window)| {
            let vs = wave.virtual_source;
            let rd = wave.source_distance();
            medium
                .positions
                .iter()
                .zip(&medium.reflectivities)
                .map(|(&p, &rc)| {
                    let d = (p[0] - vs[0]).hypot(p[1] - vs[1]);
                    ((((d - rd) / c) - window.t0) * fs, rc / d.sqrt())
                })
                .collect()
        })
        .collect();

    let traces: Vec<Vec<Vec<f64>>> = elements
        .par_iter()
        .map(|&ex| {
            let mut per_tx: Vec<Vec<f64>> = transmits
                .iter()
                .map(|(_, w)| vec![0.0; w.n_samples])
                .collect();
            for (s, &p) in medium.positions.iter().enumerate() {
                let dx = p[0] - ex;
                let dist = dx.hypot(p[1]);
                if dist <= 0.0 {
                    continue;
                }
                let mut rx_amp = 1.0 / dist.sqrt();
                if opts.element_directivity {
                    let cos_angle = p[1] / dist;
                    if cos_angle < DIRECTIVITY_CUTOFF.cos() {
                        continue;
                    }
                    rx_amp *= cos_angle;
                }
                let rx_samples = dist / c * fs;
                for (k, trace) in per_tx.iter_mut().enumerate() {
                    let (tx_samples, tx_amp) = tx_terms[k][s];
                    let amp = tx_amp * rx_amp;
                    if amp == 0.0 {
                        continue;
                    }
                    table.deposit(trace, tx_samples + rx_samples, amp);
                }
            }
            per_tx
        })
        .collect();

    Ok((0..n_tx)
        .map(|k| {
            let (wave, window) = transmits[k];
            let mut rf = Vec::with_capacity(elements.len() * window.n_samples);
            for e in &traces {
                rf.extend_from_slice(&e[k]);
            }
            RawChannelData {
                elements: elements.len(),
                samples_per_element: window.n_samples,
                data: ChannelSamples::Rf(rf),
                wave,
                t0: window.t0,
                sampling_frequency: fs,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ProbeConfig, ScanGrid, DivergingWave, TimeWindow) {
        let probe = ProbeConfig::default();
        let grid = ScanGrid::new((0.02, 0.06), (-0.3, 0.3), 64, 32).unwrap();
        let wave = DivergingWave::for_probe(&probe, 0.0, DEFAULT_SECTOR_WIDTH).unwrap();
        let window = TimeWindow::covering(&grid, &probe, &wave, default_padding(&probe));
        (probe, grid, wave, window)
    }

    #[test]
    fn virtual_source_sits_behind_the_array() {
        let probe = ProbeConfig::default();
        let d = virtual_source_distance(&probe, DEFAULT_SECTOR_WIDTH);
        assert!((d - probe.aperture_width() / 2.0).abs() < 1e-15);
        let w = DivergingWave::for_probe(&probe, 0.3, DEFAULT_SECTOR_WIDTH).unwrap();
        assert!(w.virtual_source[1] < 0.0);
        assert!(w.virtual_source[0] < 0.0);
        assert!(w.transmit_delay([0.0, 0.0], 1540.0).abs() < 1e-18);
    }

    #[test]
    fn pulse_band_edges_are_six_db_down() {
        let probe = ProbeConfig::default();
        let p = Pulse::for_probe(&probe);
        // Gaussian spectrum exp(-(2 pi df sigma)^2 / 2) at df = 1 MHz
        let atten = (-0.5 * (2.0 * PI * 1e6 * p.sigma).powi(2)).exp();
        assert!((atten - 0.5).abs() < 1e-12);
    }

    #[test]
    fn on_axis_echo_arrives_at_two_way_time() {
        let (probe, _grid, wave, window) = setup();
        let d = 0.04;
        let medium = ScattererMedium::new(vec![[0.0, d]], vec![1.0]).unwrap();
        let rf = simulate_transmit(&medium, &probe, &wave, &window, &SimOptions::default()).unwrap();
        let e = probe.element_count / 2;
        let trace = &rf.rf().unwrap()[e * rf.samples_per_element..(e + 1) * rf.samples_per_element];
        let peak = trace
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let t_peak = window.time(peak, probe.sampling_frequency);
        let expected = 2.0 * d / probe.sound_speed;
        assert!((t_peak - expected).abs() <= 1.0 / probe.sampling_frequency);
    }

    #[test]
    fn empty_medium_gives_zero_rf() {
        let (probe, _grid, wave, window) = setup();
        let rf = simulate_transmit(&ScattererMedium::empty(), &probe, &wave, &window, &SimOptions::default())
            .unwrap();
        assert!(rf.rf().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_reflectivity_doubles_rf_exactly() {
        let (probe, _grid, wave, window) = setup();
        let m1 = ScattererMedium::new(vec![[0.004, 0.035]], vec![0.75]).unwrap();
        let m2 = m1.scaled(2.0);
        let a = simulate_transmit(&m1, &probe, &wave, &window, &SimOptions::default()).unwrap();
        let b = simulate_transmit(&m2, &probe, &wave, &window, &SimOptions::default()).unwrap();
        for (x, y) in a.rf().unwrap().iter().zip(b.rf().unwrap()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn shared_receive_path_matches_single_transmit() {
        let (probe, grid, _, _) = setup();
        let m = ScattererMedium::new(vec![[0.004, 0.035], [-0.01, 0.05]], vec![0.75, -1.2]).unwrap();
        let waves: Vec<(DivergingWave, TimeWindow)> = [-0.3, 0.0, 0.2]
            .iter()
            .map(|&a| {
                let w = DivergingWave::for_probe(&probe, a, DEFAULT_SECTOR_WIDTH).unwrap();
                (w, TimeWindow::covering(&grid, &probe, &w, default_padding(&probe)))
            })
            .collect();
        let all = simulate_transmits(&m, &probe, &waves, &SimOptions::default()).unwrap();
        for (k, (w, win)) in waves.iter().enumerate() {
            let one = simulate_transmit(&m, &probe, w, win, &SimOptions::default()).unwrap();
            assert_eq!(one, all[k]);
        }
    }

    #[test]
    fn table_matches_analytic_pulse() {
        let probe = ProbeConfig::default();
        let pulse = Pulse::for_probe(&probe);
        let table = PulseTable::new(&pulse, probe.sampling_frequency, TABLE_OVERSAMPLING);
        let mut trace = vec![0.0; 64];
        let u = 31.37;
        table.deposit(&mut trace, u, 1.0);
        for (n, v) in trace.iter().enumerate() {
            let exact = pulse.value((n as f64 - u) / probe.sampling_frequency);
            assert!((v - exact).abs() < 2e-4, "n={n} {v} vs {exact}");
        }
    }
}
