//! Image quality on envelope images.

use crate::iq::RealImage;
use crate::{Error, Result};

use super::regions::RegionMasks;

fn same_shape(a: &RealImage, b: &RealImage) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("images {:?} and {:?} differ", a.shape(), b.shape())));
    }
    if a.is_empty() {
        return Err(Error::Empty("empty image".into()));
    }
    Ok(())
}

/// `20 log10(max(y) / rmse)`; `+inf` for a perfect match.
pub fn psnr(yhat: &RealImage, y: &RealImage) -> Result<f64> {
    same_shape(yhat, y)?;
    let peak = y.max();
    if !(peak > 0.0) {
        return Err(Error::Degenerate("PSNR reference has no positive peak".into()));
    }
    let mse = yhat
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// Population mean, variances and covariance.
fn moments(a: &[f64], b: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        va += dx * dx;
        vb += dy * dy;
        cov += dx * dy;
    }
    (ma, mb, va / n, vb / n, cov / n)
}

fn ssim_formula(ma: f64, mb: f64, va: f64, vb: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

/// Stabilizers `((0.01 L)^2, (0.03 L)^2)` with `L = max(y)`.
pub fn ssim_constants(y: &RealImage) -> (f64, f64) {
    let l = y.max();
    ((0.01 * l).powi(2), (0.03 * l).powi(2))
}

/// Single-window SSIM over the whole image.
pub fn ssim_with(yhat: &RealImage, y: &RealImage, c1: f64, c2: f64) -> Result<f64> {
    same_shape(yhat, y)?;
    let (ma, mb, va, vb, cov) = moments(&yhat.data, &y.data);
    let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
    if !(den > 0.0) {
        return Err(Error::Degenerate("SSIM of two constant zero images".into()));
    }
    Ok(ssim_formula(ma, mb, va, vb, cov, c1, c2))
}

pub fn ssim(yhat: &RealImage, y: &RealImage) -> Result<f64> {
    let (c1, c2) = ssim_constants(y);
    ssim_with(yhat, y, c1, c2)
}

/// Mean SSIM over `window x window` sliding windows (stride 1, windows
/// fully inside the image).
pub fn ssim_windowed(yhat: &RealImage, y: &RealImage, window: usize) -> Result<f64> {
    same_shape(yhat, y)?;
    if window == 0 || window > y.rows || window > y.cols {
        return Err(Error::invalid("SSIM window larger than the image"));
    }
    let (c1, c2) = ssim_constants(y);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut a = Vec::with_capacity(window * window);
    let mut b = Vec::with_capacity(window * window);
    for i in 0..=y.rows - window {
        for j in 0..=y.cols - window {
            a.clear();
            b.clear();
            for di in 0..window {
                for dj in 0..window {
                    a.push(yhat.at(i + di, j + dj));
                    b.push(y.at(i + di, j + dj));
                }
            }
            let (ma, mb, va, vb, cov) = moments(&a, &b);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += if den > 0.0 { ssim_formula(ma, mb, va, vb, cov, c1, c2) } else { 1.0 };
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

/// `20 log10(|mu_c - mu_b| / sqrt(var_c + var_b))`.
pub fn cnr_samples(cyst: &[f64], background: &[f64]) -> Result<f64> {
    if cyst.is_empty() || background.is_empty() {
        return Err(Error::Empty("CNR region without pixels".into()));
    }
    let (mc, vc) = mean_var(cyst);
    let (mb, vb) = mean_var(background);
    if vc + vb == 0.0 {
        return Err(Error::Degenerate("CNR with zero variance in both regions".into()));
    }
    let diff = (mc - mb).abs();
    if diff == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (diff / (vc + vb).sqrt()).log10())
}

pub fn cnr(image: &RealImage, regions: &RegionMasks) -> Result<f64> {
    let (c, b) = regions.samples(image)?;
    cnr_samples(&c, &b)
}

/// One minus the overlap of the two regions' histograms on `bins` shared
/// equal-width bins spanning the pooled range.
pub fn gcnr_samples(cyst: &[f64], background: &[f64], bins: usize) -> Result<f64> {
    if cyst.is_empty() || background.is_empty() {
        return Err(Error::Empty("gCNR region without pixels".into()));
    }
    if bins < 2 {
        return Err(Error::invalid("gCNR needs at least two bins"));
    }
    let lo = cyst.iter().chain(background).copied().fold(f64::INFINITY, f64::min);
    let hi = cyst.iter().chain(background).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let histogram = |v: &[f64]| {
        let mut h = vec![0u64; bins];
        for x in v {
            h[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
        h
    };
    // Overlap in integer arithmetic: sum_k min(c_k / n_c, b_k / n_b).
    let (nc, nb) = (cyst.len() as u128, background.len() as u128);
    let overlap: u128 = histogram(cyst)
        .iter()
        .zip(&histogram(background))
        .map(|(&c, &b)| (c as u128 * nb).min(b as u128 * nc))
        .sum();
    Ok(1.0 - overlap as f64 / (nc * nb) as f64)
}

pub const GCNR_BINS: usize = 256;

pub fn gcnr(image: &RealImage, regions: &RegionMasks, bins: usize) -> Result<f64> {
    let (c, b) = regions.samples(image)?;
    gcnr_samples(&c, &b, bins)
}
