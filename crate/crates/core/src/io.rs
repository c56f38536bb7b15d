//! On-disk containers: little-endian float32 blobs with JSON sidecars.
//!
//! * I/Q image: `<stem>.bin` holds `rows * cols` interleaved `(re, im)` f32
//!   pairs in row-major order; `<stem>.json` holds an [`IqSidecar`].
//! * Motion field: `<stem>.bin` holds three blocks, points `(x, z)` for every
//!   entry, then vectors `(dx, dz)`, then the mask as `0.0 / 1.0`, all f32;
//!   `<stem>.json` holds a [`FieldSidecar`].

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::field::MotionField;
use crate::geom::ScanGrid;
use crate::iq::IQImage;
use crate::{Error, Result};

pub const DTYPE_F32LE: &str = "f32le";

pub fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn encode_f32(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| (v as f32).to_le_bytes())
        .collect()
}

pub fn decode_f32(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "blob length is not a multiple of 4"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_f32_file(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    write_bytes(path, &encode_f32(values))
}

pub fn read_f32_file(path: &Path) -> Result<Vec<f64>> {
    decode_f32(&read_bytes(path)?, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

pub fn encode_complex(samples: &[Complex64]) -> Vec<u8> {
    encode_f32(samples.iter().flat_map(|z| [z.re, z.im]))
}

pub fn decode_complex(bytes: &[u8], path: &Path) -> Result<Vec<Complex64>> {
    let flat = decode_f32(bytes, path)?;
    if flat.len() % 2 != 0 {
        return Err(Error::format(path, "odd number of interleaved values"));
    }
    Ok(flat
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub kind: String,
    pub dtype: String,
    pub layout: String,
    pub rows: usize,
    pub cols: usize,
    pub grid: ScanGrid,
    pub frame_time: f64,
}

pub fn save_iq(stem: &Path, image: &IQImage) -> Result<()> {
    write_bytes(&with_ext(stem, "bin"), &encode_complex(&image.samples))?;
    let sidecar = IqSidecar {
        kind: "iq_image".into(),
        dtype: DTYPE_F32LE.into(),
        layout: "row_major_interleaved_re_im".into(),
        rows: image.rows(),
        cols: image.cols(),
        grid: image.grid,
        frame_time: image.frame_time,
    };
    write_json(&with_ext(stem, "json"), &sidecar)
}

pub fn load_iq(stem: &Path) -> Result<IQImage> {
    let json_path = with_ext(stem, "json");
    let sidecar: IqSidecar = read_json(&json_path)?;
    if sidecar.dtype != DTYPE_F32LE {
        return Err(Error::format(&json_path, format!("unsupported dtype {}", sidecar.dtype)));
    }
    if sidecar.rows != sidecar.grid.n_depth || sidecar.cols != sidecar.grid.n_angle {
        return Err(Error::format(&json_path, "dimensions disagree with grid"));
    }
    let bin_path = with_ext(stem, "bin");
    let samples = decode_complex(&read_bytes(&bin_path)?, &bin_path)?;
    IQImage::new(sidecar.grid, samples, sidecar.frame_time)
        .map_err(|e| Error::format(&bin_path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub kind: String,
    pub dtype: String,
    pub layout: String,
    pub count: usize,
    pub interframe_dt: f64,
}

pub fn save_field(stem: &Path, field: &MotionField) -> Result<()> {
    let values = field
        .points
        .iter()
        .flat_map(|p| [p[0], p[1]])
        .chain(field.vectors.iter().flat_map(|v| [v[0], v[1]]))
        .chain(field.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
    write_f32_file(&with_ext(stem, "bin"), values)?;
    let sidecar = FieldSidecar {
        kind: "motion_field".into(),
        dtype: DTYPE_F32LE.into(),
        layout: "points_xz,vectors_dxdz,mask".into(),
        count: field.len(),
        interframe_dt: field.interframe_dt,
    };
    write_json(&with_ext(stem, "json"), &sidecar)
}

pub fn load_field(stem: &Path) -> Result<MotionField> {
    let sidecar: FieldSidecar = read_json(&with_ext(stem, "json"))?;
    let bin_path = with_ext(stem, "bin");
    let values = read_f32_file(&bin_path)?;
    let n = sidecar.count;
    if values.len() != 5 * n {
        return Err(Error::format(&bin_path, format!("expected {} values", 5 * n)));
    }
    let points = values[..2 * n].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let vectors = values[2 * n..4 * n]
        .chunks_exact(2)
        .map(|c| [c[0], c[1]])
        .collect();
    let mask = values[4 * n..].iter().map(|&m| m != 0.0).collect();
    MotionField::new(points, vectors, mask, sidecar.interframe_dt)
        .map_err(|e| Error::format(&bin_path, e.to_string()))
}
