//! `simulate`: paired dynamic/frozen acquisitions and true motion.

use std::path::Path;

use dwecho::beamform::{beamform_stack, compound};
use dwecho::io::{save_field, save_iq};
use dwecho::net::split_cases;
use dwecho::sim::{
    advance_medium, generate_paired_acquisition, make_disk_phantom, make_medium_from_template,
    motion_field_from_model, synthetic_template, AcquisitionOptions, DiskPhantom, MotionModel,
    ScattererMedium, Template,
};
use dwecho::ScanGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{derive_seed, file_sha256, DiskScene, ExperimentConfig, SceneConfig, TemplateScene};
use crate::dataset::{
    create_dir, frame_name, motion_name, sequence_name, tracking_points, write_manifest, DatasetManifest,
    FrameManifest, SequenceManifest, Splits, TemplateInfo, DATASET_FORMAT, DATASET_VERSION, TOOL_VERSION,
};
use crate::error::{CliError, Result};

struct SequencePlan {
    grid: ScanGrid,
    motion: MotionModel,
    medium: ScattererMedium,
    medium_seed: u64,
    template: Option<TemplateInfo>,
    phantom: Option<DiskPhantom>,
    patch_origin: Option<[usize; 2]>,
}

fn patch_grid(parent: &ScanGrid, origin: [usize; 2], size: [usize; 2]) -> dwecho::Result<ScanGrid> {
    let [i0, j0] = origin;
    let [r, c] = size;
    ScanGrid::new(
        (parent.depth(i0), parent.depth(i0 + r - 1)),
        (parent.angle(j0), parent.angle(j0 + c - 1)),
        r,
        c,
    )
}

/// The patch centre has at least one element inside its receive aperture.
/// Patches may straddle the edge of the imaged cone, so training also sees
/// weak and empty regions.
fn well_covered(grid: &ScanGrid, cfg: &ExperimentConfig) -> bool {
    let elements = cfg.probe.element_positions();
    let (lo, hi) = (elements[0], elements[elements.len() - 1]);
    let p = grid.fractional_to_cartesian(0.5 * (grid.n_depth - 1) as f64, 0.5 * (grid.n_angle - 1) as f64);
    let gap = (lo - p[0]).max(p[0] - hi).max(0.0);
    gap < p[1] / cfg.das.f_number / 2.0
}

fn place_patch(
    parent: &ScanGrid,
    size: [usize; 2],
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(ScanGrid, [usize; 2])> {
    for _ in 0..1000 {
        let i0 = rng.random_range(0..=parent.n_depth - size[0]);
        let j0 = rng.random_range(0..=parent.n_angle - size[1]);
        let grid = patch_grid(parent, [i0, j0], size)?;
        if well_covered(&grid, cfg) {
            return Ok((grid, [i0, j0]));
        }
    }
    Err(CliError::Config("no patch position lies inside the receive aperture".into()))
}

/// Rotations on even sequences, translations on odd ones.
fn random_motion(scene: &TemplateScene, grid: &ScanGrid, index: usize, rng: &mut ChaCha8Rng) -> MotionModel {
    let m = &scene.motion;
    if index % 2 == 0 {
        let mid = grid.fractional_to_cartesian(
            0.5 * (grid.n_depth - 1) as f64,
            0.5 * (grid.n_angle - 1) as f64,
        );
        let r = m.max_center_offset * rng.random::<f64>().sqrt();
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        MotionModel::RigidRotation {
            center: [mid[0] + r * a.cos(), mid[1] + r * a.sin()],
            omega: rng.random_range(-1.0..=1.0) * m.max_omega,
        }
    } else {
        let speed = rng.random::<f64>() * m.max_speed;
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        MotionModel::Translation {
            velocity: [speed * a.cos(), speed * a.sin()],
        }
    }
}

fn template_plans(cfg: &ExperimentConfig, scene: &TemplateScene) -> Result<Vec<SequencePlan>> {
    let mut templates: Vec<(Template, TemplateInfo)> = Vec::new();
    for path in &scene.template_paths {
        let t = Template::load(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let info = TemplateInfo::File {
            path: name,
            sha256: file_sha256(path)?,
            width: t.width,
            height: t.height,
        };
        templates.push((t, info));
    }
    for k in 0..scene.synthetic_templates {
        let seed = derive_seed(cfg.seed, "template", k as u64);
        templates.push((
            synthetic_template(seed, scene.synthetic_size),
            TemplateInfo::Synthetic {
                seed,
                size: scene.synthetic_size,
            },
        ));
    }
    let parent = scene.grid.resolve(&cfg.probe)?;
    templates
        .into_iter()
        .enumerate()
        .map(|(k, (template, info))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "sequence", k as u64));
            let (grid, origin) = match scene.patch {
                None => (parent, None),
                Some(size) => {
                    let (grid, origin) = place_patch(&parent, size, cfg, &mut rng)?;
                    (grid, Some(origin))
                }
            };
            let motion = random_motion(scene, &grid, k, &mut rng);
            let medium_seed = derive_seed(cfg.seed, "medium", k as u64);
            let medium = make_medium_from_template(&template, &grid, &cfg.probe, &scene.medium, medium_seed)?;
            Ok(SequencePlan {
                grid,
                motion,
                medium,
                medium_seed,
                template: Some(info),
                phantom: None,
                patch_origin: origin,
            })
        })
        .collect()
}

/// One sequence per speed, all spinning the same scatterer realization.
fn disk_plans(cfg: &ExperimentConfig, scene: &DiskScene) -> Result<Vec<SequencePlan>> {
    let grid = scene.grid.resolve(&cfg.probe)?;
    let medium_seed = derive_seed(cfg.seed, "medium", 0);
    let medium = make_disk_phantom(&scene.phantom, &cfg.probe, scene.density, medium_seed)?;
    Ok(scene
        .speeds
        .iter()
        .map(|&omega| SequencePlan {
            grid,
            motion: MotionModel::RigidRotation {
                center: scene.phantom.center,
                omega,
            },
            medium: medium.clone(),
            medium_seed,
            template: None,
            phantom: Some(scene.phantom.clone()),
            patch_origin: None,
        })
        .collect())
}

/// Simulates the configured scene into `out` and returns the manifest that
/// was written there.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let input_scheme = cfg.acquisition.input_scheme()?;
    let reference_scheme = cfg.acquisition.reference_scheme()?;
    let interval = cfg.frame_interval();
    let frames = cfg.dataset.frames_per_sequence;
    let (kind, plans) = match &cfg.scene {
        SceneConfig::Templates(t) => ("templates", template_plans(cfg, t)?),
        SceneConfig::Disk(d) => ("disk", disk_plans(cfg, d)?),
    };
    if plans.is_empty() {
        return Err(CliError::Config("scene produced no sequences".into()));
    }
    let splits = match kind {
        "disk" => Splits {
            test: (0..plans.len()).collect(),
            ..Splits::default()
        },
        _ => {
            let mut parts = split_cases(plans.len(), &cfg.dataset.split, derive_seed(cfg.seed, "split", 0))?;
            let test = parts.pop().unwrap_or_default();
            let val = parts.pop().unwrap_or_default();
            let train = parts.pop().unwrap_or_default();
            Splits { train, val, test }
        }
    };
    create_dir(out)?;
    let opts = AcquisitionOptions { sim: cfg.acquisition.sim };
    let mut names = Vec::with_capacity(plans.len());
    for (s, plan) in plans.iter().enumerate() {
        let name = sequence_name(s);
        let seq_dir = out.join(&name);
        create_dir(&seq_dir)?;
        let points = tracking_points(&plan.grid, &cfg.track);
        let mut frame_names = Vec::with_capacity(frames);
        let mut frame_times = Vec::with_capacity(frames);
        let mut truth = Vec::new();
        for k in 0..frames {
            let t = k as f64 * interval;
            let medium = advance_medium(&plan.medium, &plan.motion, t)?;
            let pair = generate_paired_acquisition(
                &medium,
                &plan.motion,
                &cfg.probe,
                &plan.grid,
                &input_scheme,
                &reference_scheme,
                &opts,
            )?;
            let inputs = beamform_stack(&pair.input, &cfg.probe, &plan.grid, &cfg.das)?;
            let reference = compound(&beamform_stack(&pair.reference, &cfg.probe, &plan.grid, &cfg.das)?)?;
            let fname = frame_name(k);
            let fdir = seq_dir.join(&fname);
            let mut input_names = Vec::with_capacity(inputs.len());
            for (i, img) in inputs.iter().enumerate() {
                let stem = format!("input_{i}");
                save_iq(&fdir.join(&stem), img)?;
                input_names.push(stem);
            }
            save_iq(&fdir.join("reference"), &reference)?;
            write_manifest(
                &fdir.join("manifest.json"),
                &FrameManifest {
                    frame_time: pair.frame_time,
                    inputs: input_names,
                    input_times: pair.input.times.clone(),
                    reference: Some("reference".into()),
                    reference_transmits: pair.reference.len(),
                },
            )?;
            if k + 1 < frames && !points.is_empty() {
                let field = motion_field_from_model(&points, &plan.motion, t, interval)?;
                let stem = motion_name(k);
                save_field(&seq_dir.join(&stem), &field)?;
                truth.push(stem);
            }
            frame_names.push(fname);
            frame_times.push(pair.frame_time);
            log::info!("{name} frame {k} of {frames} done");
        }
        let (angular_velocity, rotation_center) = match plan.motion {
            MotionModel::RigidRotation { center, omega } => (Some(omega), Some(center)),
            _ => (None, None),
        };
        write_manifest(
            &seq_dir.join("sequence.json"),
            &SequenceManifest {
                name: name.clone(),
                grid: plan.grid,
                motion: plan.motion.clone(),
                angular_velocity,
                rotation_center,
                template: plan.template.clone(),
                phantom: plan.phantom.clone(),
                patch_origin: plan.patch_origin,
                medium_seed: plan.medium_seed,
                scatterers: plan.medium.len(),
                frame_interval: interval,
                frame_times,
                frames: frame_names,
                ground_truth: truth,
            },
        )?;
        names.push(name);
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        tool_version: TOOL_VERSION.into(),
        config_hash: cfg.config_hash(),
        simulation_hash: cfg.simulation_hash(),
        seed: cfg.seed,
        scene_kind: kind.into(),
        probe: cfg.probe.clone(),
        input_scheme,
        reference_scheme,
        das: cfg.das,
        frame_interval: interval,
        frames_per_sequence: frames,
        sequences: names,
        splits,
    };
    write_manifest(&out.join("dataset.json"), &manifest)?;
    Ok(manifest)
}
