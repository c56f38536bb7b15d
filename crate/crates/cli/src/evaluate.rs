//! `evaluate`: image and motion metrics, CSV series, B-mode snapshots and plots.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dwecho::beamform::envelope;
use dwecho::eval::{
    cnr, gcnr, mepd, mepe, psnr, rave, ssim, ssim_windowed, FrameMetrics, MetricReport, RaveRoi, RegionMasks,
    RegionShape, RegionSpec, METRIC_NAMES,
};
use dwecho::sim::motion_field_from_model;
use dwecho::{MotionField, ScanGrid};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::dataset::{create_dir, write_manifest, Dataset, SequenceManifest};
use crate::error::{data, CliError, Result};
use crate::reconstruct::Reconstruction;
use crate::render::{line_plot, save_bmode_png};
use crate::track::Tracking;

const TIME_TOLERANCE: f64 = 1e-9;

/// A named reconstruction, optionally with its tracking result.
/// Parsed from `name=recon_dir[,track_dir]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInput {
    pub name: String,
    pub recon: PathBuf,
    pub track: Option<PathBuf>,
}

impl FromStr for EvalInput {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected name=recon_dir[,track_dir], got {s:?}"))?;
        let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid {
            return Err(format!("method name {name:?} must be [A-Za-z0-9_-]+"));
        }
        let (recon, track) = match rest.split_once(',') {
            Some((r, t)) => (r, Some(PathBuf::from(t))),
            None => (rest, None),
        };
        if recon.is_empty() {
            return Err("empty reconstruction path".into());
        }
        Ok(Self {
            name: name.into(),
            recon: recon.into(),
            track,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEvaluation {
    pub name: String,
    pub angular_velocity: Option<f64>,
    pub report: MetricReport,
}

impl SequenceEvaluation {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.report.summary(metric).map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEvaluation {
    pub name: String,
    /// Every frame of every sequence, in sequence order.
    pub report: MetricReport,
    pub sequences: Vec<SequenceEvaluation>,
}

impl MethodEvaluation {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.report.summary(metric).map(|s| s.mean)
    }

    pub fn sequence(&self, name: &str) -> Option<&SequenceEvaluation> {
        self.sequences.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub methods: Vec<MethodEvaluation>,
}

impl EvaluationSummary {
    pub fn method(&self, name: &str) -> Option<&MethodEvaluation> {
        self.methods.iter().find(|m| m.name == name)
    }
}

/// Cyst and background masks of one frame. Disk cysts follow the rotation
/// to the frame time; all cysts are pooled into one region pair.
fn frame_regions(
    cfg: &ExperimentConfig,
    seq: &SequenceManifest,
    grid: &ScanGrid,
    frame_time: f64,
) -> Result<Option<RegionMasks>> {
    if let Some(spec) = &cfg.evaluation.regions {
        return Ok(Some(spec.resolve(grid)?));
    }
    let Some(phantom) = &seq.phantom else {
        return Ok(None);
    };
    let angle = seq.angular_velocity.unwrap_or(0.0) * frame_time;
    let s = cfg.evaluation.disk_regions;
    let centres = phantom.cyst_centers(angle);
    let spec = RegionSpec::Shapes {
        cyst: centres
            .iter()
            .zip(&phantom.cysts)
            .map(|(&center, c)| RegionShape::Disk {
                center,
                radius: s.cyst_scale * c.radius,
            })
            .collect(),
        background: centres
            .iter()
            .zip(&phantom.cysts)
            .map(|(&center, c)| RegionShape::Annulus {
                center,
                inner_radius: s.ring_inner * c.radius,
                outer_radius: s.ring_outer * c.radius,
            })
            .collect(),
    };
    Ok(Some(spec.resolve(grid)?))
}

fn rave_roi(cfg: &ExperimentConfig, seq: &SequenceManifest, center: [f64; 2]) -> RaveRoi {
    let g = &seq.grid;
    let cell = g.depth_step().max(center[0].hypot(center[1]) * g.angle_step());
    RaveRoi {
        min_radius: cfg.evaluation.rave_min_radius_cells * cell,
        max_radius: seq
            .phantom
            .as_ref()
            .map_or(f64::INFINITY, |p| cfg.evaluation.rave_max_radius_fraction * p.radius),
    }
}

/// On disk sequences, masks out points beyond the RAVE outer radius. The
/// ground truth only describes scatterers that exist, and outside the disk
/// there are none.
fn inside_disk(cfg: &ExperimentConfig, seq: &SequenceManifest, field: &MotionField) -> MotionField {
    let mut f = field.clone();
    if let Some(p) = &seq.phantom {
        let limit = cfg.evaluation.rave_max_radius_fraction * p.radius;
        for (m, q) in f.mask.iter_mut().zip(&f.points) {
            *m &= (q[0] - p.center[0]).hypot(q[1] - p.center[1]) <= limit;
        }
    }
    f
}

/// Records a metric, turning degenerate-input failures into NaN.
fn record(frame: &mut FrameMetrics, name: &str, value: dwecho::Result<f64>) -> Result<()> {
    match value {
        Ok(v) => {
            frame.set(name, v);
            Ok(())
        }
        Err(dwecho::Error::Degenerate(msg)) | Err(dwecho::Error::Empty(msg)) => {
            log::warn!("{name}: {msg}");
            frame.set(name, f64::NAN);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

struct Loaded {
    input: EvalInput,
    recon: Reconstruction,
    track: Option<Tracking>,
}

fn open_input(input: &EvalInput, dataset: &Dataset) -> Result<Loaded> {
    let recon = Reconstruction::open(&input.recon)?;
    if recon.manifest.simulation_hash != dataset.manifest.simulation_hash {
        return Err(data(format!("{} was not reconstructed from this dataset", input.name)));
    }
    for s in &recon.manifest.sequences {
        let k = dataset
            .sequence_index(&s.name)
            .ok_or_else(|| data(format!("{}: unknown sequence {}", input.name, s.name)))?;
        let truth = &dataset.sequences[k].frame_times;
        let aligned = truth.len() == s.frame_times.len()
            && truth.iter().zip(&s.frame_times).all(|(a, b)| (a - b).abs() <= TIME_TOLERANCE);
        if !aligned {
            return Err(data(format!("{}: sequence {} is misaligned with the dataset", input.name, s.name)));
        }
    }
    let track = match &input.track {
        None => None,
        Some(dir) => {
            let t = Tracking::open(dir)?;
            for s in &recon.manifest.sequences {
                let ts = t
                    .sequence(&s.name)
                    .ok_or_else(|| data(format!("{}: no tracks for {}", input.name, s.name)))?;
                let aligned = ts.fields.len() + 1 == s.frames.len()
                    && ts.frame_times.iter().zip(&s.frame_times).all(|(a, b)| (a - b).abs() <= TIME_TOLERANCE);
                if !aligned {
                    return Err(data(format!("{}: tracks of {} are misaligned", input.name, s.name)));
                }
            }
            Some(t)
        }
    };
    Ok(Loaded {
        input: input.clone(),
        recon,
        track,
    })
}

fn sequence_names(l: &Loaded) -> Vec<String> {
    l.recon.manifest.sequences.iter().map(|s| s.name.clone()).collect()
}

fn format_cell(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) => format!("{v:.10e}"),
    }
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    data(format!("csv: {e}"))
}

fn write_series(out: &Path, methods: &[MethodEvaluation]) -> Result<()> {
    let mut header = vec!["method", "sequence", "angular_velocity", "frame", "frame_time"];
    header.extend(METRIC_NAMES);
    let mut w = csv::Writer::from_path(out.join("metrics_vs_time.csv")).map_err(csv_error)?;
    w.write_record(&header).map_err(csv_error)?;
    for m in methods {
        for s in &m.sequences {
            for (k, f) in s.report.frames.iter().enumerate() {
                let mut row = vec![
                    m.name.clone(),
                    s.name.clone(),
                    format_cell(s.angular_velocity),
                    k.to_string(),
                    format_cell(Some(f.frame_time)),
                ];
                row.extend(METRIC_NAMES.iter().map(|n| format_cell(f.get(n))));
                w.write_record(&row).map_err(csv_error)?;
            }
        }
    }
    w.flush().map_err(|e| data(e.to_string()))?;

    let mut header = vec!["method", "sequence", "angular_velocity"];
    header.extend(METRIC_NAMES);
    let mut w = csv::Writer::from_path(out.join("metrics_vs_speed.csv")).map_err(csv_error)?;
    w.write_record(&header).map_err(csv_error)?;
    for m in methods {
        for s in &m.sequences {
            let mut row = vec![m.name.clone(), s.name.clone(), format_cell(s.angular_velocity)];
            row.extend(METRIC_NAMES.iter().map(|n| format_cell(s.mean(n))));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| data(e.to_string()))
}

fn write_plots(out: &Path, methods: &[MethodEvaluation]) {
    let dir = out.join("plots");
    if let Err(e) = create_dir(&dir) {
        log::warn!("plots skipped: {e}");
        return;
    }
    for metric in METRIC_NAMES {
        let over_time: Vec<Vec<(f64, f64)>> = methods
            .iter()
            .flat_map(|m| &m.sequences)
            .map(|s| s.report.frames.iter().filter_map(|f| f.get(metric).map(|v| (f.frame_time, v))).collect())
            .collect();
        if over_time.iter().any(|s: &Vec<(f64, f64)>| !s.is_empty()) {
            if let Err(e) = line_plot(&dir.join(format!("{metric}_vs_time.png")), &over_time) {
                log::warn!("{metric} vs time plot not rendered: {e}");
            }
        }
        let over_speed: Vec<Vec<(f64, f64)>> = methods
            .iter()
            .map(|m| {
                m.sequences
                    .iter()
                    .filter_map(|s| Some((s.angular_velocity?, s.mean(metric)?)))
                    .collect()
            })
            .collect();
        if over_speed.iter().any(|s| s.len() > 1) {
            if let Err(e) = line_plot(&dir.join(format!("{metric}_vs_speed.png")), &over_speed) {
                log::warn!("{metric} vs speed plot not rendered: {e}");
            }
        }
    }
}

fn aggregate(report: &MetricReport) -> Value {
    report.aggregate_json()["metrics"].clone()
}

/// Scores each method against the dataset's frozen-time frames and true
/// motion. With `reference`, motion fields are also compared to the
/// reference method's tracks (MEPD).
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    dataset_dir: &Path,
    methods: &[EvalInput],
    reference: Option<&EvalInput>,
    out: &Path,
) -> Result<EvaluationSummary> {
    if methods.is_empty() {
        return Err(CliError::Config("nothing to evaluate".into()));
    }
    for (k, m) in methods.iter().enumerate() {
        if methods[..k].iter().any(|o| o.name == m.name) {
            return Err(CliError::Config(format!("method name {} used twice", m.name)));
        }
    }
    let dataset = Dataset::open(dataset_dir)?;
    crate::train::check_dataset(cfg, &dataset)?;
    let loaded: Vec<Loaded> = methods.iter().map(|m| open_input(m, &dataset)).collect::<Result<_>>()?;
    let names = sequence_names(&loaded[0]);
    if loaded.iter().any(|l| sequence_names(l) != names) {
        return Err(data("methods cover different sequences"));
    }
    let reference = match reference {
        None => None,
        Some(r) => {
            let l = open_input(r, &dataset)?;
            if l.track.is_none() {
                return Err(CliError::Config("the reference needs a tracking result".into()));
            }
            if !names.iter().all(|n| sequence_names(&l).contains(n)) {
                return Err(data("reference does not cover every evaluated sequence"));
            }
            Some(l)
        }
    };
    create_dir(out)?;
    let e = &cfg.evaluation;
    let mut results = Vec::with_capacity(loaded.len());
    for l in &loaded {
        let mut all = MetricReport::new(&l.input.name);
        let mut per_seq = Vec::with_capacity(names.len());
        for (r, name) in names.iter().enumerate() {
            let s = dataset.sequence_index(name).expect("checked at open");
            let seq = &dataset.sequences[s];
            let frames = l.recon.load_sequence(r)?;
            let fields: Option<Vec<MotionField>> = match &l.track {
                Some(t) => Some(t.load_fields(name)?),
                None => None,
            };
            let ref_fields: Option<Vec<MotionField>> = match &reference {
                Some(rl) => Some(rl.track.as_ref().expect("checked").load_fields(name)?),
                None => None,
            };
            let mut report = MetricReport::new(&l.input.name);
            for (f, image) in frames.iter().enumerate() {
                let target = dataset.load_reference(s, f)?;
                if image.grid != target.grid {
                    return Err(data(format!("{}: {name} frame {f} is on another grid", l.input.name)));
                }
                let (yhat, y) = (envelope(image), envelope(&target));
                let mut fm = FrameMetrics::new(seq.frame_times[f]);
                record(&mut fm, "psnr_db", psnr(&yhat, &y))?;
                let s_val = match e.ssim_window {
                    Some(w) => ssim_windowed(&yhat, &y, w),
                    None => ssim(&yhat, &y),
                };
                record(&mut fm, "ssim", s_val)?;
                if let Some(masks) = frame_regions(cfg, seq, &image.grid, seq.frame_times[f])? {
                    record(&mut fm, "cnr_db", cnr(&yhat, &masks))?;
                    record(&mut fm, "gcnr", gcnr(&yhat, &masks, e.gcnr_bins))?;
                }
                if let Some(fields) = &fields {
                    if let Some(est) = fields.get(f) {
                        let truth = motion_field_from_model(&est.points, &seq.motion, seq.frame_times[f], est.interframe_dt)?;
                        record(&mut fm, "mepe_m", mepe(&inside_disk(cfg, seq, est), &truth))?;
                        if let (Some(omega), Some(center)) = (seq.angular_velocity, seq.rotation_center) {
                            if omega != 0.0 {
                                record(&mut fm, "rave", rave(est, center, omega, &rave_roi(cfg, seq, center)))?;
                            }
                        }
                        if let Some(rf) = ref_fields.as_ref().and_then(|v| v.get(f)) {
                            if !est.same_points(rf, 1e-9) {
                                return Err(data(format!("{name}: reference tracks use other points")));
                            }
                            record(&mut fm, "mepd_m", mepd(&inside_disk(cfg, seq, est), rf))?;
                        }
                    }
                }
                all.push(fm.clone());
                report.push(fm);
            }
            if e.bmode_png {
                if let Some(first) = frames.first() {
                    let path = out.join("bmode").join(&l.input.name).join(format!("{name}.png"));
                    save_bmode_png(first, e.dynamic_range_db, &path)?;
                }
            }
            per_seq.push(SequenceEvaluation {
                name: name.clone(),
                angular_velocity: seq.angular_velocity,
                report,
            });
        }
        all.write(out, &l.input.name)?;
        results.push(MethodEvaluation {
            name: l.input.name.clone(),
            report: all,
            sequences: per_seq,
        });
    }
    if e.bmode_png {
        for name in &names {
            let s = dataset.sequence_index(name).expect("checked");
            let target = dataset.load_reference(s, 0)?;
            save_bmode_png(&target, e.dynamic_range_db, &out.join("bmode").join("frozen_reference").join(format!("{name}.png")))?;
        }
    }
    write_series(out, &results)?;
    if e.plots {
        write_plots(out, &results);
    }
    let doc = json!({
        "simulation_hash": dataset.manifest.simulation_hash,
        "config_hash": cfg.config_hash(),
        "reference": reference.as_ref().map(|r| r.input.name.clone()),
        "methods": results.iter().map(|m| json!({
            "method": m.name,
            "metrics": aggregate(&m.report),
            "sequences": m.sequences.iter().map(|s| json!({
                "sequence": s.name,
                "angular_velocity": s.angular_velocity,
                "metrics": aggregate(&s.report),
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    write_manifest(&out.join("evaluation.json"), &doc)?;
    Ok(EvaluationSummary { methods: results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_input_parsing() {
        let a: EvalInput = "cnn=out/recon,out/track".parse().unwrap();
        assert_eq!(a.name, "cnn");
        assert_eq!(a.recon, PathBuf::from("out/recon"));
        assert_eq!(a.track, Some(PathBuf::from("out/track")));
        let b: EvalInput = "c3=r".parse().unwrap();
        assert_eq!(b.track, None);
        assert!("bad name=r".parse::<EvalInput>().is_err());
        assert!("noequals".parse::<EvalInput>().is_err());
    }
}
