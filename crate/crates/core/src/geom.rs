//! Probe, transmit sequence and polar scan-grid geometry.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Phased-array probe and acquisition front end.
///
/// Defaults describe a 64-element P4-2 class phased array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub element_count: usize,
    /// Element centre-to-centre spacing (m).
    pub pitch: f64,
    /// Gap between elements (m).
    pub kerf: f64,
    /// Hz.
    pub center_frequency: f64,
    /// Lower and upper band edges (Hz).
    pub bandwidth: (f64, f64),
    /// Hz.
    pub sampling_frequency: f64,
    /// m/s.
    pub sound_speed: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            element_count: 64,
            pitch: 0.3e-3,
            kerf: 50e-6,
            center_frequency: 3e6,
            bandwidth: (2e6, 4e6),
            sampling_frequency: 12e6,
            sound_speed: 1540.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.element_count < 2 {
            return Err(Error::invalid("probe needs at least 2 elements"));
        }
        let positive = [
            self.pitch,
            self.kerf,
            self.center_frequency,
            self.bandwidth.0,
            self.bandwidth.1,
            self.sampling_frequency,
            self.sound_speed,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("probe quantities must be finite and > 0"));
        }
        if self.kerf >= self.pitch {
            return Err(Error::invalid("kerf must be smaller than pitch"));
        }
        let (lo, hi) = self.bandwidth;
        if !(lo < self.center_frequency && self.center_frequency < hi) {
            return Err(Error::invalid(
                "bandwidth interval must contain the center frequency",
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.center_frequency
    }

    /// Width of the -6 dB band (Hz).
    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth.1 - self.bandwidth.0
    }

    pub fn fractional_bandwidth(&self) -> f64 {
        self.bandwidth_hz() / self.center_frequency
    }

    /// Full aperture width `element_count * pitch` (m).
    pub fn aperture_width(&self) -> f64 {
        self.element_count as f64 * self.pitch
    }

    pub fn element_width(&self) -> f64 {
        self.pitch - self.kerf
    }

    /// Lateral element centres, symmetric about `x = 0`.
    pub fn element_positions(&self) -> Vec<f64> {
        let half = (self.element_count as f64 - 1.0) / 2.0;
        (0..self.element_count)
            .map(|e| (e as f64 - half) * self.pitch)
            .collect()
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sampling_frequency
    }
}

/// Whether the transmits of one frame see one medium state or a moving one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Every transmit fires at the frame time.
    FrozenTime,
    /// Transmits are spaced by `1 / prf` and centred on the frame time.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitScheme {
    /// Tilt angles (rad).
    pub angles: Vec<f64>,
    /// Pulse repetition frequency (Hz).
    pub prf: f64,
    pub mode: TimingMode,
}

impl TransmitScheme {
    pub fn new(angles: Vec<f64>, prf: f64, mode: TimingMode) -> Result<Self> {
        let scheme = Self { angles, prf, mode };
        scheme.validate()?;
        Ok(scheme)
    }

    /// `n` tilts evenly spread over `[-half_span, half_span]`.
    pub fn evenly_spaced(n: usize, half_span: f64, prf: f64, mode: TimingMode) -> Result<Self> {
        Self::new(make_evenly_spaced_angles(n, half_span)?, prf, mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() {
            return Err(Error::invalid("transmit scheme has no angles"));
        }
        if self
            .angles
            .iter()
            .any(|a| !(a.is_finite() && a.abs() < FRAC_PI_2))
        {
            return Err(Error::invalid("tilt angles must lie in (-pi/2, pi/2)"));
        }
        if !(self.prf.is_finite() && self.prf > 0.0) {
            return Err(Error::invalid("prf must be > 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Inter-transmit interval `1 / prf` (s).
    pub fn interval(&self) -> f64 {
        1.0 / self.prf
    }

    /// Firing time of each transmit relative to the frame time.
    pub fn time_offsets(&self) -> Vec<f64> {
        let n = self.angles.len();
        match self.mode {
            TimingMode::FrozenTime => vec![0.0; n],
            TimingMode::Dynamic => {
                let mid = (n as f64 - 1.0) / 2.0;
                (0..n)
                    .map(|i| (i as f64 - mid) * self.interval())
                    .collect()
            }
        }
    }
}

/// `n` angles linearly spaced over `[-half_span, half_span]`; `n = 1` gives `[0]`.
///
/// Angles `i` and `n - 1 - i` are exact negatives of each other.
pub fn make_evenly_spaced_angles(n: usize, half_span: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one angle"));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let k = 2 * i as i64 - (n as i64 - 1);
            half_span * (k as f64) / denom
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridGeometry {
    #[default]
    PolarSector,
}

/// Polar sector sampled on `n_depth x n_angle` nodes.
///
/// Row `i` is depth, column `j` is angle. Node `(i, j)` sits at
/// `(r sin(theta), r cos(theta))` with the array centre at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    #[serde(default)]
    pub geometry: GridGeometry,
    /// (m, m)
    pub depth_range: (f64, f64),
    /// (rad, rad)
    pub angle_range: (f64, f64),
    pub n_depth: usize,
    pub n_angle: usize,
}

fn lerp_node(range: (f64, f64), k: usize, n: usize) -> f64 {
    if n <= 1 {
        return range.0;
    }
    let t = k as f64 / (n - 1) as f64;
    range.0 * (1.0 - t) + range.1 * t
}

impl ScanGrid {
    pub fn new(
        depth_range: (f64, f64),
        angle_range: (f64, f64),
        n_depth: usize,
        n_angle: usize,
    ) -> Result<Self> {
        let grid = Self {
            geometry: GridGeometry::PolarSector,
            depth_range,
            angle_range,
            n_depth,
            n_angle,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Sector whose radial step and mid-depth arc step are both about `lambda / 2`.
    pub fn half_wavelength(
        probe: &ProbeConfig,
        depth_range: (f64, f64),
        angle_range: (f64, f64),
    ) -> Result<Self> {
        let step = probe.wavelength() / 2.0;
        let n_depth = ((depth_range.1 - depth_range.0) / step).round() as usize + 1;
        let mid = 0.5 * (depth_range.0 + depth_range.1);
        let n_angle = (mid * (angle_range.1 - angle_range.0) / step).round() as usize + 1;
        Self::new(depth_range, angle_range, n_depth, n_angle)
    }

    /// 1 to 10 cm deep, +/-45 degrees, half-wavelength sampling.
    pub fn default_for(probe: &ProbeConfig) -> Result<Self> {
        let half = 45f64.to_radians();
        Self::half_wavelength(probe, (0.01, 0.10), (-half, half))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_depth == 0 || self.n_angle == 0 {
            return Err(Error::invalid("grid needs at least one node"));
        }
        let (r0, r1) = self.depth_range;
        let (a0, a1) = self.angle_range;
        if !(r0.is_finite() && r1.is_finite() && r0 >= 0.0 && r1 >= r0) {
            return Err(Error::invalid("depth range must satisfy 0 <= min <= max"));
        }
        if self.n_depth > 1 && r1 <= r0 {
            return Err(Error::invalid("depth range is empty"));
        }
        if !(a0.is_finite() && a1.is_finite() && a0 > -FRAC_PI_2 && a1 < FRAC_PI_2 && a1 >= a0) {
            return Err(Error::invalid("angle range must lie inside (-pi/2, pi/2)"));
        }
        if self.n_angle > 1 && a1 <= a0 {
            return Err(Error::invalid("angle range is empty"));
        }
        // The origin would collapse a whole row onto one point.
        if r0 == 0.0 && self.n_angle > 1 {
            return Err(Error::invalid("sector must start below the array (depth > 0)"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_depth * self.n_angle
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_depth, self.n_angle)
    }

    pub fn depth_step(&self) -> f64 {
        if self.n_depth > 1 {
            (self.depth_range.1 - self.depth_range.0) / (self.n_depth - 1) as f64
        } else {
            0.0
        }
    }

    pub fn angle_step(&self) -> f64 {
        if self.n_angle > 1 {
            (self.angle_range.1 - self.angle_range.0) / (self.n_angle - 1) as f64
        } else {
            0.0
        }
    }

    pub fn depth(&self, i: usize) -> f64 {
        lerp_node(self.depth_range, i, self.n_depth)
    }

    pub fn angle(&self, j: usize) -> f64 {
        lerp_node(self.angle_range, j, self.n_angle)
    }

    pub fn depths(&self) -> Vec<f64> {
        (0..self.n_depth).map(|i| self.depth(i)).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_angle).map(|j| self.angle(j)).collect()
    }

    /// Cartesian position `(x, z)` of node `(i, j)`.
    pub fn grid_to_cartesian(&self, i: usize, j: usize) -> Result<[f64; 2]> {
        if i >= self.n_depth || j >= self.n_angle {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                rows: self.n_depth,
                cols: self.n_angle,
            });
        }
        Ok(polar_to_cartesian(self.depth(i), self.angle(j)))
    }

    /// Cartesian position of a fractional grid coordinate (no bounds check).
    pub fn fractional_to_cartesian(&self, fi: f64, fj: f64) -> [f64; 2] {
        let r = self.depth_range.0 + fi * self.depth_step();
        let a = self.angle_range.0 + fj * self.angle_step();
        polar_to_cartesian(r, a)
    }

    /// Fractional `(i, j)` of a Cartesian point; may fall outside the grid.
    pub fn cartesian_to_fractional(&self, p: [f64; 2]) -> (f64, f64) {
        let (r, a) = cartesian_to_polar(p);
        let dr = self.depth_step();
        let da = self.angle_step();
        let fi = if dr > 0.0 { (r - self.depth_range.0) / dr } else { 0.0 };
        let fj = if da > 0.0 { (a - self.angle_range.0) / da } else { 0.0 };
        (fi, fj)
    }

    /// Nearest node of a Cartesian point, `None` outside the sector.
    pub fn cartesian_to_grid(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let (fi, fj) = self.cartesian_to_fractional(p);
        let (i, j) = (fi.round(), fj.round());
        if i < 0.0 || j < 0.0 || i >= self.n_depth as f64 || j >= self.n_angle as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    /// Whether `p` lies inside the sector (within half a cell of its edges).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.cartesian_to_grid(p).is_some()
    }

    /// All node positions, row-major.
    pub fn positions(&self) -> Vec<[f64; 2]> {
        let angles = self.angles();
        (0..self.n_depth)
            .flat_map(|i| {
                let r = self.depth(i);
                angles
                    .iter()
                    .map(move |&a| polar_to_cartesian(r, a))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Area of the annular sector (m^2).
    pub fn sector_area(&self) -> f64 {
        let (r0, r1) = self.depth_range;
        0.5 * (self.angle_range.1 - self.angle_range.0) * (r1 * r1 - r0 * r0)
    }

    /// Axis-aligned Cartesian bounding box `([xmin, zmin], [xmax, zmax])`.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let (r0, r1) = self.depth_range;
        let (a0, a1) = self.angle_range;
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut zmin = f64::INFINITY;
        let mut zmax = f64::NEG_INFINITY;
        for r in [r0, r1] {
            for a in [a0, a1, 0.0f64.clamp(a0, a1)] {
                let [x, z] = polar_to_cartesian(r, a);
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                zmin = zmin.min(z);
                zmax = zmax.max(z);
            }
        }
        ([xmin, zmin], [xmax, zmax])
    }
}

pub fn polar_to_cartesian(r: f64, angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [r * s, r * c]
}

/// `(r, angle)` with the angle measured from the `z` axis toward `+x`.
pub fn cartesian_to_polar(p: [f64; 2]) -> (f64, f64) {
    (p[0].hypot(p[1]), p[0].atan2(p[1]))
}
