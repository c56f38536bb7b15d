//! B-mode scan conversion and metric line plots.

use std::path::Path;

use dwecho::beamform::bmode;
use dwecho::{IQImage, Result as CoreResult};
use image::{GrayImage, Luma};
use plotters::prelude::*;

use crate::error::{CliError, Result};

/// Polar B-mode resampled onto a Cartesian raster whose longer side has
/// `max_side` pixels. Pixels outside the sector are black.
pub fn scan_convert(image: &IQImage, dynamic_range_db: f64, max_side: u32) -> CoreResult<GrayImage> {
    let db = bmode(image, dynamic_range_db)?;
    let grid = &image.grid;
    let ([xmin, zmin], [xmax, zmax]) = grid.bounding_box();
    let extent = (xmax - xmin).max(zmax - zmin);
    let pixel = extent / max_side.max(1) as f64;
    let w = (((xmax - xmin) / pixel).ceil() as u32).max(1);
    let h = (((zmax - zmin) / pixel).ceil() as u32).max(1);
    let last_i = (grid.n_depth - 1) as f64;
    let last_j = (grid.n_angle - 1) as f64;
    Ok(GrayImage::from_fn(w, h, |u, v| {
        let p = [xmin + (u as f64 + 0.5) * pixel, zmin + (v as f64 + 0.5) * pixel];
        let (fi, fj) = grid.cartesian_to_fractional(p);
        if !(fi >= 0.0 && fi <= last_i && fj >= 0.0 && fj <= last_j) {
            return Luma([0]);
        }
        let value = db.bilinear(fi, fj);
        Luma([(((value + dynamic_range_db) / dynamic_range_db) * 255.0).round().clamp(0.0, 255.0) as u8])
    }))
}

pub fn save_bmode_png(image: &IQImage, dynamic_range_db: f64, path: &Path) -> Result<()> {
    let png = scan_convert(image, dynamic_range_db, 512)?;
    if let Some(parent) = path.parent() {
        crate::dataset::create_dir(parent)?;
    }
    png.save(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// One line per series, axes without text. Non-finite points are skipped.
pub fn line_plot(path: &Path, series: &[Vec<(f64, f64)>]) -> std::result::Result<(), String> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .flatten()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if points.is_empty() {
        return Err("nothing to plot".into());
    }
    let fold = |f: fn(&(f64, f64)) -> f64| {
        points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x0, x1) = fold(|p| p.0);
    let (y0, y1) = fold(|p| p.1);
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let (w, h) = (640u32, 480u32);
    let mut buffer = vec![0u8; (w * h * 3) as usize];
    {
        let root = BitMapBackend::with_buffer(&mut buffer, (w, h)).into_drawing_area();
        draw_lines(&root, series, (x0, x1), (y0, y1))?;
    }
    let img = image::RgbImage::from_raw(w, h, buffer).ok_or("plot buffer size")?;
    img.save(path).map_err(|e| e.to_string())
}

fn draw_lines(
    root: &DrawingArea<BitMapBackend<'_>, plotters::coord::Shift>,
    series: &[Vec<(f64, f64)>],
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
) -> std::result::Result<(), String> {
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let mut chart = ChartBuilder::on(root)
        .margin(20)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| e.to_string())?;
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let clean: Vec<(f64, f64)> = s.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        chart
            .draw_series(LineSeries::new(clean.iter().copied(), color.stroke_width(2)))
            .map_err(|e| e.to_string())?;
        chart
            .draw_series(clean.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(|e| e.to_string())?;
    }
    root.present().map_err(|e| e.to_string())
}
