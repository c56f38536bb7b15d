//! RF to complex baseband.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::transmit::{ChannelSamples, RawChannelData};
use crate::geom::ProbeConfig;
use crate::{Error, Result};

/// Linear-phase lowpass used after mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodFilter {
    pub taps: Vec<f64>,
}

impl DemodFilter {
    /// Hamming-windowed sinc with unit DC gain; `n_taps` must be odd so the
    /// group delay is a whole number of samples.
    pub fn lowpass(cutoff_hz: f64, fs: f64, n_taps: usize) -> Result<Self> {
        if n_taps % 2 == 0 || n_taps < 3 {
            return Err(Error::invalid("FIR length must be odd and >= 3"));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
            return Err(Error::invalid("cutoff must lie in (0, fs/2)"));
        }
        let m = (n_taps - 1) as f64;
        let fc = cutoff_hz / fs;
        let mut taps: Vec<f64> = (0..n_taps)
            .map(|k| {
                let n = k as f64 - m / 2.0;
                let sinc = if n == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * n).sin() / (PI * n)
                };
                let window = 0.54 - 0.46 * (2.0 * PI * k as f64 / m).cos();
                sinc * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= sum;
        }
        Ok(Self { taps })
    }

    /// Default filter for a probe: cutoff at half the bandwidth.
    pub fn for_probe(probe: &ProbeConfig) -> Self {
        Self::lowpass(probe.bandwidth_hz() / 2.0, probe.sampling_frequency, 33)
            .expect("probe validated")
    }

    pub fn half_length(&self) -> usize {
        self.taps.len() / 2
    }

    /// Zero-delay ("same") filtering with zero padding at both ends.
    pub fn apply(&self, signal: &[Complex64]) -> Vec<Complex64> {
        let h = self.half_length() as isize;
        let n = signal.len() as isize;
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &t) in self.taps.iter().enumerate() {
                    let idx = i + h - k as isize;
                    if idx >= 0 && idx < n {
                        acc += signal[idx as usize] * t;
                    }
                }
                acc
            })
            .collect()
    }
}

/// Mixes every channel down by `exp(-j 2 pi f0 t)`, lowpasses and scales by 2
/// so a narrowband echo keeps its envelope amplitude.
pub fn demodulate(raw: &RawChannelData, probe: &ProbeConfig, filter: &DemodFilter) -> Result<RawChannelData> {
    let rf = match &raw.data {
        ChannelSamples::Rf(v) => v,
        ChannelSamples::Baseband(_) => {
            return Err(Error::invalid("channel data is already baseband"));
        }
    };
    let ns = raw.samples_per_element;
    let fs = raw.sampling_frequency;
    let f0 = probe.center_frequency;
    let mixer: Vec<Complex64> = (0..ns)
        .map(|n| {
            let t = raw.t0 + n as f64 / fs;
            Complex64::from_polar(2.0, -2.0 * PI * f0 * t)
        })
        .collect();
    let mut out = Vec::with_capacity(rf.len());
    for trace in rf.chunks_exact(ns.max(1)) {
        let mixed: Vec<Complex64> = trace.iter().zip(&mixer).map(|(&x, &m)| m * x).collect();
        out.extend(filter.apply(&mixed));
    }
    Ok(RawChannelData {
        data: ChannelSamples::Baseband(out),
        ..raw.clone()
    })
}
