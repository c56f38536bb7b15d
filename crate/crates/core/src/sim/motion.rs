//! Parametric and sampled scatterer motion.

use serde::{Deserialize, Serialize};

use super::medium::ScattererMedium;
use crate::field::MotionField;
use crate::{Error, Result};

/// Prescribed motion of the scatterers.
///
/// Rotation is counter-clockwise in the `(x, z)` plane for `omega > 0`:
/// a point to the right of the centre moves toward larger `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionModel {
    #[default]
    None,
    RigidRotation {
        center: [f64; 2],
        /// rad/s
        omega: f64,
    },
    Translation {
        /// m/s
        velocity: [f64; 2],
    },
    /// `p -> c + (p - c) * exp(-rate * dt)`; positive rates contract.
    RadialContraction { center: [f64; 2], rate: f64 },
    /// Piecewise-constant velocity taken from a sequence of motion fields.
    /// Field `k` applies on `[start_time + k * dt_k, start_time + (k + 1) * dt_k)`;
    /// the velocity at a point is the nearest valid vector divided by the
    /// field's `interframe_dt`.
    SampledField {
        fields: Vec<MotionField>,
        #[serde(default)]
        start_time: f64,
    },
}

impl MotionModel {
    /// Position of a scatterer that sits at `p` at time `t`, `dt` later.
    /// `dt` may be negative.
    pub fn displace(&self, p: [f64; 2], t: f64, dt: f64) -> [f64; 2] {
        if dt == 0.0 {
            return p;
        }
        match self {
            MotionModel::None => p,
            MotionModel::RigidRotation { center, omega } => {
                let (s, c) = (omega * dt).sin_cos();
                let dx = p[0] - center[0];
                let dz = p[1] - center[1];
                [center[0] + c * dx - s * dz, center[1] + s * dx + c * dz]
            }
            MotionModel::Translation { velocity } => {
                [p[0] + velocity[0] * dt, p[1] + velocity[1] * dt]
            }
            MotionModel::RadialContraction { center, rate } => {
                let k = (-rate * dt).exp();
                [
                    center[0] + (p[0] - center[0]) * k,
                    center[1] + (p[1] - center[1]) * k,
                ]
            }
            MotionModel::SampledField { fields, start_time } => {
                integrate_sampled(fields, *start_time, p, t, dt)
            }
        }
    }

    /// Displacement vector of the point over `dt`.
    pub fn displacement(&self, p: [f64; 2], t: f64, dt: f64) -> [f64; 2] {
        let q = self.displace(p, t, dt);
        [q[0] - p[0], q[1] - p[1]]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MotionModel::SampledField { fields, .. } => {
                if fields.is_empty() {
                    return Err(Error::Empty("sampled motion needs at least one field".into()));
                }
                for f in fields {
                    f.validate()?;
                    if !(f.interframe_dt > 0.0) || f.valid_count() == 0 {
                        return Err(Error::invalid(
                            "sampled motion fields need dt > 0 and a valid vector",
                        ));
                    }
                }
                Ok(())
            }
            MotionModel::RigidRotation { omega: v, .. } | MotionModel::RadialContraction { rate: v, .. } => {
                if v.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("motion parameter must be finite"))
                }
            }
            MotionModel::Translation { velocity } => {
                if velocity.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::invalid("velocity must be finite"))
                }
            }
            MotionModel::None => Ok(()),
        }
    }

    /// True angular velocity for rotations.
    pub fn angular_velocity(&self) -> Option<f64> {
        match self {
            MotionModel::RigidRotation { omega, .. } => Some(*omega),
            _ => None,
        }
    }
}

fn nearest_velocity(field: &MotionField, p: [f64; 2]) -> [f64; 2] {
    let mut best = f64::INFINITY;
    let mut v = [0.0, 0.0];
    for (q, d) in field.valid() {
        let dist = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        if dist < best {
            best = dist;
            v = d;
        }
    }
    [v[0] / field.interframe_dt, v[1] / field.interframe_dt]
}

fn integrate_sampled(fields: &[MotionField], start: f64, p: [f64; 2], t: f64, dt: f64) -> [f64; 2] {
    let span = fields[0].interframe_dt;
    let last = (fields.len() - 1) as f64;
    let index_at = |time: f64| ((time - start) / span).floor().clamp(0.0, last) as usize;
    let (lo, hi) = if dt > 0.0 { (t, t + dt) } else { (t + dt, t) };
    let mut cuts = vec![lo];
    cuts.extend(
        (1..fields.len())
            .map(|k| start + k as f64 * span)
            .filter(|&b| b > lo && b < hi),
    );
    cuts.push(hi);
    if dt < 0.0 {
        cuts.reverse();
    }
    // One explicit Euler step per field interval crossed.
    let mut pos = p;
    for w in cuts.windows(2) {
        let v = nearest_velocity(&fields[index_at(0.5 * (w[0] + w[1]))], pos);
        let step = w[1] - w[0];
        pos = [pos[0] + v[0] * step, pos[1] + v[1] * step];
    }
    pos
}

/// Moves every scatterer by the model over `dt >= 0`; reflectivities and
/// labels are carried unchanged and scatterers leaving the sector are kept.
pub fn advance_medium(medium: &ScattererMedium, motion: &MotionModel, dt: f64) -> Result<ScattererMedium> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("advance_medium needs dt >= 0"));
    }
    Ok(shift_medium(medium, motion, dt))
}

/// Signed-time variant used to reconstruct earlier transmit states.
pub(crate) fn shift_medium(medium: &ScattererMedium, motion: &MotionModel, dt: f64) -> ScattererMedium {
    if dt == 0.0 || matches!(motion, MotionModel::None) {
        return ScattererMedium {
            time: medium.time + dt,
            ..medium.clone()
        };
    }
    let t = medium.time;
    ScattererMedium {
        positions: medium
            .positions
            .iter()
            .map(|&p| motion.displace(p, t, dt))
            .collect(),
        reflectivities: medium.reflectivities.clone(),
        region_labels: medium.region_labels.clone(),
        time: t + dt,
    }
}

/// Ground-truth displacements of the scatterers sitting at `points` at time
/// `t`, over `dt`; every entry is valid.
pub fn motion_field_from_model(points: &[[f64; 2]], motion: &MotionModel, t: f64, dt: f64) -> Result<MotionField> {
    motion.validate()?;
    let vectors = points.iter().map(|&p| motion.displacement(p, t, dt)).collect();
    MotionField::new(points.to_vec(), vectors, vec![true; points.len()], dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medium() -> ScattererMedium {
        ScattererMedium::new(
            vec![[0.05, 0.06], [0.0, 0.11], [-0.02, 0.03], [0.01, 0.07]],
            vec![1.0, -0.5, 2.0, 0.25],
        )
        .unwrap()
    }

    #[test]
    fn no_motion_is_identity() {
        let m = medium();
        let a = advance_medium(&m, &MotionModel::None, 0.01).unwrap();
        assert_eq!(a.positions, m.positions);
        assert_eq!(a.reflectivities, m.reflectivities);
        assert_eq!(a.time, 0.01);
    }

    #[test]
    fn negative_dt_is_rejected() {
        assert!(advance_medium(&medium(), &MotionModel::None, -1e-3).is_err());
    }

    #[test]
    fn rotation_arc_at_rim() {
        let center = [0.0, 0.06];
        let m = ScattererMedium::new(vec![[0.05, 0.06]], vec![1.0]).unwrap();
        let rot = MotionModel::RigidRotation { center, omega: 12.0 };
        let dt = 1.0 / 4500.0;
        let a = advance_medium(&m, &rot, dt).unwrap();
        let p = a.positions[0];
        let r = (p[0] - center[0]).hypot(p[1] - center[1]);
        assert!((r - 0.05).abs() / 0.05 < 1e-9);
        let angle = (p[1] - center[1]).atan2(p[0] - center[0]);
        let arc = angle * 0.05;
        assert!((arc - 133.33e-6).abs() < 0.01e-6, "arc {arc}");
        assert!(p[1] > 0.06);
    }

    #[test]
    fn translation_shifts_exactly() {
        let v = [0.1, -0.05];
        let dt = 2e-4;
        let m = medium();
        let a = advance_medium(&m, &MotionModel::Translation { velocity: v }, dt).unwrap();
        for (p, q) in m.positions.iter().zip(&a.positions) {
            assert_eq!(q[0], p[0] + v[0] * dt);
            assert_eq!(q[1], p[1] + v[1] * dt);
        }
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let m = medium();
        let rot = MotionModel::RigidRotation {
            center: [0.003, 0.05],
            omega: 7.0,
        };
        let a = advance_medium(&m, &rot, 0.013).unwrap();
        for i in 0..m.len() {
            for j in (i + 1)..m.len() {
                let d0 = dist(m.positions[i], m.positions[j]);
                let d1 = dist(a.positions[i], a.positions[j]);
                assert!((d0 - d1).abs() / d0 < 1e-9);
            }
        }
    }

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    #[test]
    fn contraction_and_reverse_cancel() {
        let c = MotionModel::RadialContraction {
            center: [0.0, 0.05],
            rate: 3.0,
        };
        let p = [0.01, 0.07];
        let q = c.displace(c.displace(p, 0.0, 0.02), 0.02, -0.02);
        assert!(dist(p, q) < 1e-15);
        let inner = c.displace(p, 0.0, 0.02);
        assert!(dist(inner, [0.0, 0.05]) < dist(p, [0.0, 0.05]));
    }

    #[test]
    fn sampled_field_uses_nearest_vector_per_interval() {
        let dt = 1e-3;
        let f0 = MotionField::new(vec![[0.0, 0.05]], vec![[1e-4, 0.0]], vec![true], dt).unwrap();
        let f1 = MotionField::new(vec![[0.0, 0.05]], vec![[0.0, 2e-4]], vec![true], dt).unwrap();
        let model = MotionModel::SampledField {
            fields: vec![f0, f1],
            start_time: 0.0,
        };
        model.validate().unwrap();
        let p = [0.0, 0.05];
        let q = model.displace(p, 0.0, 2e-3);
        assert!((q[0] - 1e-4).abs() < 1e-15);
        assert!((q[1] - (0.05 + 2e-4)).abs() < 1e-15);
        let back = model.displace(q, 2e-3, -2e-3);
        assert!(dist(back, p) < 1e-12);
    }
}
