//! Cyst and background regions on a scan grid.

use serde::{Deserialize, Serialize};

use crate::geom::ScanGrid;
use crate::iq::RealImage;
use crate::{Error, Result};

/// Geometric primitive in Cartesian metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RegionShape {
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner_radius: f64, outer_radius: f64 },
}

impl RegionShape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            RegionShape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= radius,
            RegionShape::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                r > inner_radius && r <= outer_radius
            }
        }
    }
}

/// Regions given as shape unions or explicit row-major masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Shapes {
        cyst: Vec<RegionShape>,
        background: Vec<RegionShape>,
    },
    Masks {
        cyst: Vec<bool>,
        background: Vec<bool>,
    },
}

/// Pixel masks on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub rows: usize,
    pub cols: usize,
    pub cyst: Vec<bool>,
    pub background: Vec<bool>,
}

impl RegionMasks {
    pub fn new(rows: usize, cols: usize, cyst: Vec<bool>, background: Vec<bool>) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            cyst,
            background,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if self.cyst.len() != n || self.background.len() != n {
            return Err(Error::shape("region masks do not match the grid"));
        }
        if self.cyst.iter().zip(&self.background).any(|(a, b)| *a && *b) {
            return Err(Error::invalid("cyst and background regions overlap"));
        }
        if !self.cyst.iter().any(|&v| v) || !self.background.iter().any(|&v| v) {
            return Err(Error::Empty("a region has no pixels".into()));
        }
        Ok(())
    }

    /// Pixel values inside the cyst and background masks.
    pub fn samples(&self, image: &RealImage) -> Result<(Vec<f64>, Vec<f64>)> {
        if image.shape() != (self.rows, self.cols) {
            return Err(Error::shape("image and region masks differ in size"));
        }
        let pick = |mask: &[bool]| -> Vec<f64> {
            image.data.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect()
        };
        Ok((pick(&self.cyst), pick(&self.background)))
    }
}

impl RegionSpec {
    pub fn resolve(&self, grid: &ScanGrid) -> Result<RegionMasks> {
        let (rows, cols) = grid.shape();
        match self {
            RegionSpec::Masks { cyst, background } => RegionMasks::new(rows, cols, cyst.clone(), background.clone()),
            RegionSpec::Shapes { cyst, background } => {
                let positions = grid.positions();
                let inside = |shapes: &[RegionShape]| -> Vec<bool> {
                    positions.iter().map(|&p| shapes.iter().any(|s| s.contains(p))).collect()
                };
                RegionMasks::new(rows, cols, inside(cyst), inside(background))
            }
        }
    }

    /// Each cyst disk paired with a surrounding background ring
    /// `[inner_scale * r, outer_scale * r]`.
    pub fn cysts_with_rings(cysts: &[([f64; 2], f64)], inner_scale: f64, outer_scale: f64) -> Self {
        RegionSpec::Shapes {
            cyst: cysts.iter().map(|&(center, radius)| RegionShape::Disk { center, radius }).collect(),
            background: cysts
                .iter()
                .map(|&(center, radius)| RegionShape::Annulus {
                    center,
                    inner_radius: inner_scale * radius,
                    outer_radius: outer_scale * radius,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_regions_are_rejected() {
        let grid = ScanGrid::new((0.02, 0.06), (-0.3, 0.3), 40, 40).unwrap();
        let c = [0.0, 0.04];
        let spec = RegionSpec::Shapes {
            cyst: vec![RegionShape::Disk { center: c, radius: 0.005 }],
            background: vec![RegionShape::Disk { center: c, radius: 0.01 }],
        };
        assert!(spec.resolve(&grid).is_err());
        let ok = RegionSpec::cysts_with_rings(&[(c, 0.005)], 1.2, 2.0);
        let m = ok.resolve(&grid).unwrap();
        assert!(m.cyst.iter().filter(|&&v| v).count() > 0);
    }
}
