//! Point-scatterer media: template-driven sectors and the spinning disk phantom.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geom::{polar_to_cartesian, ProbeConfig, ScanGrid};
use crate::{Error, Result};

/// Point scatterers with real reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererMedium {
    pub positions: Vec<[f64; 2]>,
    pub reflectivities: Vec<f64>,
    pub region_labels: Option<Vec<u8>>,
    /// Medium clock (s); advanced by [`super::advance_medium`].
    pub time: f64,
}

impl ScattererMedium {
    pub fn new(positions: Vec<[f64; 2]>, reflectivities: Vec<f64>) -> Result<Self> {
        if positions.len() != reflectivities.len() {
            return Err(Error::shape("positions and reflectivities differ in length"));
        }
        Ok(Self {
            positions,
            reflectivities,
            region_labels: None,
            time: 0.0,
        })
    }

    pub fn empty() -> Self {
        Self {
            positions: Vec::new(),
            reflectivities: Vec::new(),
            region_labels: None,
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            reflectivities: self.reflectivities.iter().map(|r| r * factor).collect(),
            ..self.clone()
        }
    }
}

/// 8-bit grayscale template, row-major, `(0, 0)` top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Template {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::shape("template dimensions disagree with pixel count"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn uniform(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Loads a PGM or PNG file, converting color input to luma.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .ok_or_else(|| Error::shape("template buffer"))?;
        img.save(path)?;
        Ok(())
    }

    /// Bilinear intensity at fractional pixel `(u, v)`, clamped to the border.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let x = u.clamp(0.0, (self.width - 1) as f64);
        let y = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let px = |xx: usize, yy: usize| self.pixels[yy * self.width + xx] as f64;
        let top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
        let bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Scatterer generation settings shared by all medium builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MediumParams {
    /// Scatterers per square wavelength.
    pub density: f64,
    /// Gamma-compression constant of the template.
    pub gamma: f64,
    /// Extra margin around the imaged sector that is also populated (m).
    pub guard: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self {
            density: 10.0,
            gamma: 2.2,
            guard: 3e-3,
        }
    }
}

/// Annular sector `r in [r_min, r_max]`, `angle in [a_min, a_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorRegion {
    pub r_min: f64,
    pub r_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl SectorRegion {
    /// The grid's sector grown by `guard` metres radially and laterally.
    pub fn around(grid: &ScanGrid, guard: f64) -> Self {
        let r_min = (grid.depth_range.0 - guard).max(0.0);
        let r_max = grid.depth_range.1 + guard;
        let lateral = if grid.depth_range.0 > 0.0 {
            guard / grid.depth_range.0.max(guard)
        } else {
            0.0
        };
        let lim = 89f64.to_radians();
        Self {
            r_min,
            r_max,
            a_min: (grid.angle_range.0 - lateral).max(-lim),
            a_max: (grid.angle_range.1 + lateral).min(lim),
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.a_max - self.a_min) * (self.r_max * self.r_max - self.r_min * self.r_min)
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        let (r0, r1) = (self.r_min * self.r_min, self.r_max * self.r_max);
        let r = (r0 + rng.random::<f64>() * (r1 - r0)).sqrt();
        let a = self.a_min + rng.random::<f64>() * (self.a_max - self.a_min);
        polar_to_cartesian(r, a)
    }
}

fn poisson_count(mean: f64, rng: &mut impl Rng) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Scatterers spread uniformly over the grid's sector (plus guard), weighted
/// by the gamma-expanded template intensity times a standard normal draw.
///
/// The template is stretched over the Cartesian bounding box of the sector;
/// scatterers in the guard band read the clamped border intensity.
pub fn make_medium_from_template(
    template: &Template,
    grid: &ScanGrid,
    probe: &ProbeConfig,
    params: &MediumParams,
    seed: u64,
) -> Result<ScattererMedium> {
    if !(params.density > 0.0) {
        return Err(Error::invalid("scatterer density must be > 0"));
    }
    if !(params.gamma > 0.0) {
        return Err(Error::invalid("gamma must be > 0"));
    }
    let region = SectorRegion::around(grid, params.guard);
    if !(region.area() > 0.0) || grid.sector_area() <= 0.0 {
        return Err(Error::Empty("imaging sector has zero area".into()));
    }
    let lambda = probe.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = poisson_count(region.area() * params.density / (lambda * lambda), &mut rng)?;

    let ([xmin, zmin], [xmax, zmax]) = grid.bounding_box();
    let su = (template.width - 1) as f64 / (xmax - xmin).max(f64::MIN_POSITIVE);
    let sv = (template.height - 1) as f64 / (zmax - zmin).max(f64::MIN_POSITIVE);
    let inv_gamma = 1.0 / params.gamma;

    let mut positions = Vec::with_capacity(count);
    let mut reflectivities = Vec::with_capacity(count);
    for _ in 0..count {
        let p = region.sample(&mut rng);
        let n: f64 = StandardNormal.sample(&mut rng);
        let intensity = template.sample((p[0] - xmin) * su, (p[1] - zmin) * sv);
        positions.push(p);
        reflectivities.push((intensity / 255.0).powf(inv_gamma) * n);
    }
    Ok(ScattererMedium {
        positions,
        reflectivities,
        region_labels: None,
        time: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cyst {
    /// Centre relative to the disk centre (m).
    pub offset: [f64; 2],
    pub radius: f64,
}

/// Tissue-mimicking disk with anechoic cysts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskPhantom {
    pub center: [f64; 2],
    pub radius: f64,
    pub cysts: Vec<Cyst>,
}

impl DiskPhantom {
    /// 10 cm disk centred at `center` with four cysts in a cross.
    pub fn four_cysts(center: [f64; 2], cyst_distance: f64, cyst_radius: f64) -> Self {
        let cysts = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
            .iter()
            .map(|d| Cyst {
                offset: [d[0] * cyst_distance, d[1] * cyst_distance],
                radius: cyst_radius,
            })
            .collect();
        Self {
            center,
            radius: 0.05,
            cysts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::invalid("disk radius must be > 0"));
        }
        for (k, c) in self.cysts.iter().enumerate() {
            if !(c.radius > 0.0) {
                return Err(Error::invalid(format!("cyst {k} radius must be > 0")));
            }
            if c.offset[0].hypot(c.offset[1]) + c.radius > self.radius {
                return Err(Error::invalid(format!("cyst {k} is not inside the disk")));
            }
            for (m, d) in self.cysts.iter().enumerate().skip(k + 1) {
                let gap = (c.offset[0] - d.offset[0]).hypot(c.offset[1] - d.offset[1]);
                if gap < c.radius + d.radius {
                    return Err(Error::invalid(format!("cysts {k} and {m} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Absolute cyst centres after the disk turned by `angle` (rad).
    pub fn cyst_centers(&self, angle: f64) -> Vec<[f64; 2]> {
        let (s, c) = angle.sin_cos();
        self.cysts
            .iter()
            .map(|cy| {
                let [dx, dz] = cy.offset;
                [
                    self.center[0] + c * dx - s * dz,
                    self.center[1] + s * dx + c * dz,
                ]
            })
            .collect()
    }

    fn in_cyst(&self, p: [f64; 2]) -> bool {
        self.cysts.iter().any(|cy| {
            let dx = p[0] - self.center[0] - cy.offset[0];
            let dz = p[1] - self.center[1] - cy.offset[1];
            dx * dx + dz * dz < cy.radius * cy.radius
        })
    }
}

/// Rim speed `omega * radius` (m/s).
pub fn rim_speed(radius: f64, omega: f64) -> f64 {
    omega * radius
}

/// Uniform scatterers over the disk, none inside cysts; reflectivities are
/// standard normal. Every scatterer carries region label 1.
pub fn make_disk_phantom(
    phantom: &DiskPhantom,
    probe: &ProbeConfig,
    density: f64,
    seed: u64,
) -> Result<ScattererMedium> {
    phantom.validate()?;
    if !(density > 0.0) {
        return Err(Error::invalid("scatterer density must be > 0"));
    }
    let lambda = probe.wavelength();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = PI * phantom.radius * phantom.radius;
    let count = poisson_count(area * density / (lambda * lambda), &mut rng)?;
    let mut positions = Vec::with_capacity(count);
    let mut reflectivities = Vec::with_capacity(count);
    let r2 = phantom.radius * phantom.radius;
    for _ in 0..count {
        let r = (rng.random::<f64>() * r2).sqrt();
        let a = rng.random::<f64>() * 2.0 * PI;
        let n: f64 = StandardNormal.sample(&mut rng);
        let p = [
            phantom.center[0] + r * a.cos(),
            phantom.center[1] + r * a.sin(),
        ];
        if phantom.in_cyst(p) {
            continue;
        }
        positions.push(p);
        reflectivities.push(n);
    }
    let labels = vec![1u8; positions.len()];
    Ok(ScattererMedium {
        positions,
        reflectivities,
        region_labels: Some(labels),
        time: 0.0,
    })
}

/// Procedural cardiac-like template: dark cavity, bright elliptical wall,
/// smooth texture. Deterministic in `seed`.
pub fn synthetic_template(seed: u64, size: usize) -> Template {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e3a_11c5_9d02_4b6f);
    let cx = rng.random_range(0.35..0.65);
    let cy = rng.random_range(0.35..0.65);
    let ax = rng.random_range(0.18..0.32);
    let ay = rng.random_range(0.22..0.40);
    let tilt = rng.random_range(-0.6..0.6f64);
    let thick = rng.random_range(0.06..0.14);
    let wall = rng.random_range(170.0..250.0);
    let cavity = rng.random_range(10.0..50.0);
    let tissue = rng.random_range(70.0..130.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(2.0..7.0),
                rng.random_range(2.0..7.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(10.0..30.0),
            )
        })
        .collect();
    let (st, ct) = tilt.sin_cos();
    let mut pixels = Vec::with_capacity(size * size);
    for v in 0..size {
        for u in 0..size {
            let x = u as f64 / (size - 1).max(1) as f64 - cx;
            let y = v as f64 / (size - 1).max(1) as f64 - cy;
            let xr = ct * x + st * y;
            let yr = -st * x + ct * y;
            let rho = ((xr / ax).powi(2) + (yr / ay).powi(2)).sqrt();
            let scale = ax.min(ay);
            let d = (rho - 1.0) * scale;
            let mut value = if d < -thick * 0.5 {
                cavity
            } else if d <= thick * 0.5 {
                wall
            } else {
                tissue
            };
            let edge = (d.abs() - thick * 0.5).abs();
            if edge < 0.01 {
                value = 0.5 * (value + if d.abs() < thick * 0.5 { tissue } else { wall });
            }
            let texture: f64 = waves
                .iter()
                .map(|&(fx, fy, ph, amp)| {
                    amp * (2.0 * PI * (fx * x + fy * y) + ph).sin()
                })
                .sum();
            pixels.push((value + texture).clamp(0.0, 255.0).round() as u8);
        }
    }
    Template {
        width: size,
        height: size,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ScanGrid {
        ScanGrid::new((0.03, 0.05), (-0.2, 0.2), 32, 32).unwrap()
    }

    #[test]
    fn zero_template_gives_zero_reflectivity() {
        let t = Template::uniform(8, 8, 0);
        let m = make_medium_from_template(&t, &grid(), &ProbeConfig::default(), &MediumParams::default(), 1)
            .unwrap();
        assert!(!m.is_empty());
        assert!(m.reflectivities.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn full_intensity_template_has_unit_variance() {
        let t = Template::uniform(8, 8, 255);
        // ~1.7e5 scatterers
        let g = ScanGrid::new((0.03, 0.08), (-0.8, 0.8), 8, 8).unwrap();
        let params = MediumParams {
            guard: 0.0,
            ..MediumParams::default()
        };
        let m = make_medium_from_template(&t, &g, &ProbeConfig::default(), &params, 3).unwrap();
        assert!(m.len() >= 100_000, "{}", m.len());
        let n = m.len() as f64;
        let mean = m.reflectivities.iter().sum::<f64>() / n;
        let var = m.reflectivities.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn scatterer_count_matches_density() {
        let probe = ProbeConfig::default();
        let g = grid();
        let params = MediumParams {
            guard: 0.0,
            ..MediumParams::default()
        };
        let m = make_medium_from_template(&Template::uniform(4, 4, 128), &g, &probe, &params, 9).unwrap();
        let lambda = probe.wavelength();
        let expected = g.sector_area() * 10.0 / (lambda * lambda);
        assert!((m.len() as f64 - expected).abs() < 3.0 * expected.sqrt());
    }

    #[test]
    fn same_seed_same_medium() {
        let t = synthetic_template(4, 32);
        let p = ProbeConfig::default();
        let a = make_medium_from_template(&t, &grid(), &p, &MediumParams::default(), 77).unwrap();
        let b = make_medium_from_template(&t, &grid(), &p, &MediumParams::default(), 77).unwrap();
        assert_eq!(a, b);
        let c = make_medium_from_template(&t, &grid(), &p, &MediumParams::default(), 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn medium_rejects_bad_density() {
        let params = MediumParams {
            density: 0.0,
            ..MediumParams::default()
        };
        assert!(make_medium_from_template(&Template::uniform(2, 2, 1), &grid(), &ProbeConfig::default(), &params, 0)
            .is_err());
    }

    #[test]
    fn rim_speed_at_twelve_rad_per_second() {
        assert!((rim_speed(0.05, 12.0) - 0.60).abs() < 1e-12);
    }

    #[test]
    fn disk_without_cysts_fills_disk() {
        let d = DiskPhantom {
            center: [0.0, 0.06],
            radius: 0.01,
            cysts: vec![],
        };
        let probe = ProbeConfig::default();
        let m = make_disk_phantom(&d, &probe, 10.0, 5).unwrap();
        let lambda = probe.wavelength();
        let expected = PI * 1e-4 * 10.0 / (lambda * lambda);
        assert!((m.len() as f64 - expected).abs() < 3.0 * expected.sqrt());
        assert!(m
            .positions
            .iter()
            .all(|p| (p[0]).hypot(p[1] - 0.06) <= 0.01 + 1e-12));
    }

    #[test]
    fn cysts_are_empty() {
        let d = DiskPhantom::four_cysts([0.0, 0.07], 0.025, 0.008);
        let m = make_disk_phantom(&d, &ProbeConfig::default(), 10.0, 11).unwrap();
        for c in d.cyst_centers(0.0) {
            let inside = m
                .positions
                .iter()
                .filter(|p| (p[0] - c[0]).hypot(p[1] - c[1]) < 0.008)
                .count();
            assert_eq!(inside, 0);
        }
    }

    #[test]
    fn invalid_cyst_layouts() {
        let mut d = DiskPhantom::four_cysts([0.0, 0.07], 0.045, 0.008);
        assert!(d.validate().is_err());
        d = DiskPhantom::four_cysts([0.0, 0.07], 0.025, 0.008);
        d.cysts[1].offset = [0.02, 0.0];
        assert!(d.validate().is_err());
    }

    #[test]
    fn synthetic_templates_differ_by_seed() {
        let a = synthetic_template(1, 48);
        let b = synthetic_template(2, 48);
        assert_eq!(a.pixels.len(), 48 * 48);
        assert_ne!(a, b);
        assert_eq!(a, synthetic_template(1, 48));
    }
}
