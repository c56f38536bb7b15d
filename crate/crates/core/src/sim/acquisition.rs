//! Multi-transmit acquisitions and paired (dynamic input, frozen reference) frames.

use serde::{Deserialize, Serialize};

use super::demod::{demodulate, DemodFilter};
use super::medium::ScattererMedium;
use super::motion::{shift_medium, MotionModel};
use super::transmit::{
    default_padding, simulate_transmits, DivergingWave, RawChannelData, SimOptions, TimeWindow,
    DEFAULT_SECTOR_WIDTH,
};
use crate::geom::{ProbeConfig, ScanGrid, TimingMode, TransmitScheme};
use crate::Result;

/// Baseband channel data of every transmit of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionStack {
    pub scheme: TransmitScheme,
    pub transmits: Vec<RawChannelData>,
    /// Firing time of each transmit (s).
    pub times: Vec<f64>,
}

impl AcquisitionStack {
    pub fn len(&self) -> usize {
        self.transmits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmits.is_empty()
    }
}

/// One training or evaluation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedAcquisition {
    pub frame_time: f64,
    /// Motion-affected low-quality stack.
    pub input: AcquisitionStack,
    /// Frozen-time high-quality stack.
    pub reference: AcquisitionStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AcquisitionOptions {
    pub sim: SimOptions,
}

struct Job {
    scheme: usize,
    index: usize,
    offset: f64,
    wave: DivergingWave,
    window: TimeWindow,
}

/// Simulates several schemes against one medium snapshot at `medium.time`.
///
/// Transmit `k` of a scheme sees the medium moved by its time offset.
/// Transmits that see the same medium state are simulated together.
pub fn acquire_schemes(
    medium: &ScattererMedium,
    motion: &MotionModel,
    probe: &ProbeConfig,
    grid: &ScanGrid,
    schemes: &[&TransmitScheme],
    opts: &AcquisitionOptions,
) -> Result<Vec<AcquisitionStack>> {
    probe.validate()?;
    grid.validate()?;
    motion.validate()?;
    let padding = default_padding(probe);
    let mut jobs = Vec::new();
    for (s, scheme) in schemes.iter().enumerate() {
        scheme.validate()?;
        for (k, (&angle, offset)) in scheme.angles.iter().zip(scheme.time_offsets()).enumerate() {
            let wave = DivergingWave::for_probe(probe, angle, DEFAULT_SECTOR_WIDTH)?;
            let window = TimeWindow::covering(grid, probe, &wave, padding);
            let offset = if matches!(motion, MotionModel::None) { 0.0 } else { offset };
            jobs.push(Job {
                scheme: s,
                index: k,
                offset,
                wave,
                window,
            });
        }
    }
    let mut offsets: Vec<f64> = jobs.iter().map(|j| j.offset).collect();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup();

    let filter = DemodFilter::for_probe(probe);
    let mut slots: Vec<Vec<Option<RawChannelData>>> =
        schemes.iter().map(|s| vec![None; s.len()]).collect();
    for &offset in &offsets {
        let group: Vec<&Job> = jobs.iter().filter(|j| j.offset == offset).collect();
        let moved = shift_medium(medium, motion, offset);
        let params: Vec<(DivergingWave, TimeWindow)> = group.iter().map(|j| (j.wave, j.window)).collect();
        let rf = simulate_transmits(&moved, probe, &params, &opts.sim)?;
        for (job, data) in group.iter().zip(rf) {
            slots[job.scheme][job.index] = Some(demodulate(&data, probe, &filter)?);
        }
    }
    Ok(schemes
        .iter()
        .zip(slots)
        .map(|(scheme, slot)| AcquisitionStack {
            scheme: (*scheme).clone(),
            transmits: slot.into_iter().map(|d| d.expect("every job simulated")).collect(),
            times: scheme.time_offsets().iter().map(|o| medium.time + o).collect(),
        })
        .collect())
}

/// Input stack fired around `medium.time` with the input scheme's timing,
/// and a reference stack of the reference scheme (normally frozen).
pub fn generate_paired_acquisition(
    medium: &ScattererMedium,
    motion: &MotionModel,
    probe: &ProbeConfig,
    grid: &ScanGrid,
    scheme_input: &TransmitScheme,
    scheme_ref: &TransmitScheme,
    opts: &AcquisitionOptions,
) -> Result<PairedAcquisition> {
    let mut stacks = acquire_schemes(medium, motion, probe, grid, &[scheme_input, scheme_ref], opts)?;
    let reference = stacks.pop().expect("two stacks");
    let input = stacks.pop().expect("two stacks");
    Ok(PairedAcquisition {
        frame_time: medium.time,
        input,
        reference,
    })
}

/// 3 dynamic transmits at -20, 0, 20 degrees.
pub fn default_input_scheme(prf: f64) -> Result<TransmitScheme> {
    TransmitScheme::evenly_spaced(3, 20f64.to_radians(), prf, TimingMode::Dynamic)
}

/// 31 frozen-time transmits evenly spaced over +-20 degrees.
pub fn default_reference_scheme(prf: f64) -> Result<TransmitScheme> {
    TransmitScheme::evenly_spaced(31, 20f64.to_radians(), prf, TimingMode::FrozenTime)
}
