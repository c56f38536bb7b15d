//! Motion-estimate accuracy.

use serde::{Deserialize, Serialize};

use crate::field::MotionField;
use crate::geom::ProbeConfig;
use crate::{Error, Result};

const POINT_TOLERANCE: f64 = 1e-9;

pub fn epe(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_points(a: &MotionField, b: &MotionField) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("fields with {} and {} points", a.len(), b.len())));
    }
    if a.points.iter().zip(&b.points).any(|(p, q)| epe(*p, *q) > POINT_TOLERANCE) {
        return Err(Error::shape("fields are sampled at different points"));
    }
    Ok(())
}

/// Mean distance between vectors over points valid in both fields.
fn mean_distance(a: &MotionField, b: &MotionField) -> Result<f64> {
    check_points(a, b)?;
    let (sum, n) = a
        .vectors
        .iter()
        .zip(&b.vectors)
        .zip(a.mask.iter().zip(&b.mask))
        .filter(|(_, (ma, mb))| **ma && **mb)
        .fold((0.0, 0usize), |(s, n), ((u, v), _)| (s + epe(*u, *v), n + 1));
    if n == 0 {
        return Err(Error::Empty("no point is valid in both fields".into()));
    }
    Ok(sum / n as f64)
}

/// Mean end-point error against ground truth (metres).
pub fn mepe(estimate: &MotionField, truth: &MotionField) -> Result<f64> {
    mean_distance(estimate, truth)
}

/// Mean end-point difference between two estimates (metres).
pub fn mepd(a: &MotionField, b: &MotionField) -> Result<f64> {
    mean_distance(a, b)
}

/// Annulus around the rotation centre used for angular-velocity estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaveRoi {
    pub min_radius: f64,
    pub max_radius: f64,
}

impl RaveRoi {
    pub fn contains(&self, r: f64) -> bool {
        r >= self.min_radius && r <= self.max_radius
    }
}

/// Mean angular velocity (rad/s, counter-clockwise positive in the
/// `(x, z)` plane) from tangential displacement over radius.
pub fn mean_angular_velocity(field: &MotionField, center: [f64; 2], roi: &RaveRoi) -> Result<f64> {
    if !(field.interframe_dt > 0.0) {
        return Err(Error::invalid("interframe time must be positive"));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, v) in field.valid() {
        let rx = p[0] - center[0];
        let rz = p[1] - center[1];
        let r = rx.hypot(rz);
        if r == 0.0 || !roi.contains(r) {
            continue;
        }
        let tangential = (v[1] * rx - v[0] * rz) / r;
        sum += tangential / r / field.interframe_dt;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("no valid vector inside the RAVE region".into()));
    }
    Ok(sum / n as f64)
}

/// Relative angular-velocity error `|w_est - w_true| / |w_true|`.
pub fn rave(field: &MotionField, center: [f64; 2], omega_true: f64, roi: &RaveRoi) -> Result<f64> {
    if omega_true == 0.0 || !omega_true.is_finite() {
        return Err(Error::invalid("true angular velocity must be finite and non-zero"));
    }
    let w = mean_angular_velocity(field, center, roi)?;
    Ok((w - omega_true).abs() / omega_true.abs())
}

/// Largest axial velocity resolved by motion-compensated Doppler
/// without aliasing, `c PRF / (8 f0)`.
pub fn moco_nyquist_velocity(probe: &ProbeConfig, prf: f64) -> Result<f64> {
    if !(prf > 0.0 && prf.is_finite()) {
        return Err(Error::invalid("PRF must be positive"));
    }
    probe.validate()?;
    Ok(probe.sound_speed * prf / (8.0 * probe.center_frequency))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(points: Vec<[f64; 2]>, vectors: Vec<[f64; 2]>) -> MotionField {
        let n = points.len();
        MotionField::new(points, vectors, vec![true; n], 1e-3).unwrap()
    }

    #[test]
    fn epe_examples() {
        assert_eq!(epe([0.0, 0.0], [3e-3, 4e-3]), 5e-3);
        let a = field(vec![[0.0, 0.05]], vec![[0.0, 0.0]]);
        let b = field(vec![[0.0, 0.05]], vec![[3e-3, 4e-3]]);
        assert!((mepe(&a, &b).unwrap() - 5e-3).abs() < 1e-15);
        let mut c = b.clone();
        c.mask[0] = false;
        assert!(mepe(&a, &c).is_err());
    }

    #[test]
    fn tangential_rotation_field_has_zero_rave() {
        let center = [0.0, 0.06];
        let omega = 6.0;
        let dt = 1e-3;
        let mut points = Vec::new();
        let mut vectors = Vec::new();
        for k in 0..40 {
            let a = k as f64 * 0.3;
            let r = 0.005 + 0.001 * (k % 7) as f64;
            let (rx, rz) = (r * a.cos(), r * a.sin());
            points.push([center[0] + rx, center[1] + rz]);
            vectors.push([-omega * dt * rz, omega * dt * rx]);
        }
        let f = MotionField::new(points, vectors, vec![true; 40], dt).unwrap();
        let roi = RaveRoi { min_radius: 0.0, max_radius: 1.0 };
        assert!(rave(&f, center, omega, &roi).unwrap() < 1e-12);
        assert!(rave(&f, center, 0.0, &roi).is_err());
    }

    #[test]
    fn nyquist_velocity_for_the_reference_probe() {
        let v = moco_nyquist_velocity(&ProbeConfig::default(), 4500.0).unwrap();
        assert!((v - 0.28875).abs() < 1e-12);
        assert!(moco_nyquist_velocity(&ProbeConfig::default(), 0.0).is_err());
    }
}
