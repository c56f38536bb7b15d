use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sparse 2-D displacement field: one vector per measurement point.
///
/// Points and vectors are Cartesian metres in the probe frame. Only vectors
/// flagged in `mask` carry meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionField {
    pub points: Vec<[f64; 2]>,
    pub vectors: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
    /// Time between the two frames the field links (s).
    pub interframe_dt: f64,
}

impl MotionField {
    pub fn new(
        points: Vec<[f64; 2]>,
        vectors: Vec<[f64; 2]>,
        mask: Vec<bool>,
        interframe_dt: f64,
    ) -> Result<Self> {
        let field = Self {
            points,
            vectors,
            mask,
            interframe_dt,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.vectors.len() || self.points.len() != self.mask.len() {
            return Err(Error::shape(format!(
                "motion field with {} points, {} vectors, {} mask entries",
                self.points.len(),
                self.vectors.len(),
                self.mask.len()
            )));
        }
        let bad = self
            .vectors
            .iter()
            .zip(&self.mask)
            .any(|(v, &ok)| ok && !(v[0].is_finite() && v[1].is_finite()));
        if bad {
            return Err(Error::invalid("valid motion vectors must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterator over `(point, vector)` of valid entries.
    pub fn valid(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.points
            .iter()
            .zip(&self.vectors)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((p, v), _)| (*p, *v))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            vectors: self
                .vectors
                .iter()
                .map(|v| [v[0] * factor, v[1] * factor])
                .collect(),
            ..self.clone()
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Whether two fields are sampled at the same points.
    pub fn same_points(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol)
    }
}
