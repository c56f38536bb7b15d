//! Per-frame metric tables with CSV and JSON output.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crate::{Error, Result};

/// Columns in output order.
pub const METRIC_NAMES: [&str; 7] = ["psnr_db", "ssim", "cnr_db", "gcnr", "mepe_m", "rave", "mepd_m"];

/// Metrics of one frame; `None` when not computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMetrics {
    pub frame_time: f64,
    pub values: BTreeMap<String, f64>,
}

impl FrameMetrics {
    pub fn new(frame_time: f64) -> Self {
        Self {
            frame_time,
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> &mut Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// Mean and sample standard deviation of the finite values of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub non_finite: usize,
}

/// Metric table for one method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub method: String,
    pub frames: Vec<FrameMetrics>,
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.10e}")
    }
}

fn json_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format_value(v))
    }
}

impl MetricReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            frames: Vec::new(),
        }
    }

    pub fn push(&mut self, frame: FrameMetrics) {
        self.frames.push(frame);
    }

    /// Metric names present in at least one frame, known names first.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = METRIC_NAMES
            .iter()
            .filter(|n| self.frames.iter().any(|f| f.values.contains_key(**n)))
            .map(|n| n.to_string())
            .collect();
        for f in &self.frames {
            for k in f.values.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    pub fn summary(&self, name: &str) -> Option<Summary> {
        let all: Vec<f64> = self.frames.iter().filter_map(|f| f.get(name)).collect();
        if all.is_empty() {
            return None;
        }
        let finite: Vec<f64> = all.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        let mean = if n == 0 { f64::NAN } else { finite.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 {
            0.0
        } else {
            (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Summary {
            mean,
            std,
            count: n,
            non_finite: all.len() - n,
        })
    }

    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut out = String::from("frame,frame_time");
        for c in &cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (k, f) in self.frames.iter().enumerate() {
            out.push_str(&format!("{k},{}", format_value(f.frame_time)));
            for c in &cols {
                out.push(',');
                if let Some(v) = f.get(c) {
                    out.push_str(&format_value(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn aggregate_json(&self) -> Value {
        let mut metrics = serde_json::Map::new();
        for c in self.columns() {
            if let Some(s) = self.summary(&c) {
                metrics.insert(
                    c,
                    json!({
                        "mean": json_value(s.mean),
                        "std": json_value(s.std),
                        "count": s.count,
                        "non_finite": s.non_finite,
                    }),
                );
            }
        }
        json!({
            "method": self.method,
            "frames": self.frames.len(),
            "metrics": Value::Object(metrics),
        })
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let js = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.aggregate_json())?;
        std::fs::write(&js, text).map_err(|e| Error::io(&js, e))?;
        Ok(())
    }
}
