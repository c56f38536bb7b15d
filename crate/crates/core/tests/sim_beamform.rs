use dwecho::beamform::{compound, das_beamform, das_beamform_many, envelope, DASConfig};
use dwecho::geom::make_evenly_spaced_angles;
use dwecho::sim::{
    advance_medium, default_padding, demodulate, simulate_transmit, ChannelSamples, DemodFilter, DivergingWave,
    MotionModel, RawChannelData, ScattererMedium, SimOptions, TimeWindow, DEFAULT_SECTOR_WIDTH,
};
use dwecho::{IQImage, ProbeConfig, ScanGrid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> ScanGrid {
    ScanGrid::new((0.02, 0.05), (-0.4, 0.4), 48, 32).unwrap()
}

fn rf(medium: &ScattererMedium, angle: f64) -> RawChannelData {
    let probe = ProbeConfig::default();
    let wave = DivergingWave::for_probe(&probe, angle, DEFAULT_SECTOR_WIDTH).unwrap();
    let window = TimeWindow::covering(&grid(), &probe, &wave, default_padding(&probe));
    simulate_transmit(medium, &probe, &wave, &window, &SimOptions::default()).unwrap()
}

fn baseband(medium: &ScattererMedium, angle: f64) -> RawChannelData {
    let probe = ProbeConfig::default();
    demodulate(&rf(medium, angle), &probe, &DemodFilter::for_probe(&probe)).unwrap()
}

fn random_medium(rng: &mut ChaCha8Rng, n: usize) -> ScattererMedium {
    let g = grid();
    let positions = (0..n)
        .map(|_| {
            let r = rng.random_range(g.depth_range.0..g.depth_range.1);
            let a = rng.random_range(g.angle_range.0..g.angle_range.1);
            [r * a.sin(), r * a.cos()]
        })
        .collect();
    let refl = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScattererMedium::new(positions, refl).unwrap()
}

#[test]
fn isolated_echoes_arrive_at_the_two_way_delay_on_every_element() {
    let probe = ProbeConfig::default();
    let elements = probe.element_positions();
    for (p, angle) in [([0.004, 0.03], 0.0), ([-0.006, 0.035], 0.3), ([0.01, 0.042], -0.3)] {
        let medium = ScattererMedium::new(vec![p], vec![1.0]).unwrap();
        let raw = baseband(&medium, angle);
        let data = raw.baseband().unwrap();
        let n = raw.samples_per_element;
        for (e, &xe) in elements.iter().enumerate() {
            let row = &data[e * n..(e + 1) * n];
            let k = (0..n).max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm())).unwrap();
            let t_peak = raw.t0 + k as f64 / raw.sampling_frequency;
            let tau = raw.wave.transmit_delay(p, probe.sound_speed) + (p[0] - xe).hypot(p[1]) / probe.sound_speed;
            assert!((t_peak - tau).abs() <= probe.sample_period(), "element {e}: {t_peak} vs {tau}");
        }
    }
}

fn add(a: &RawChannelData, b: &RawChannelData, wa: f64, wb: f64) -> RawChannelData {
    let (ChannelSamples::Baseband(x), ChannelSamples::Baseband(y)) = (&a.data, &b.data) else {
        panic!("baseband expected");
    };
    RawChannelData {
        data: ChannelSamples::Baseband(x.iter().zip(y).map(|(u, v)| u * wa + v * wb).collect()),
        ..a.clone()
    }
}

#[test]
fn das_is_linear_in_its_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probe = ProbeConfig::default();
    let a = baseband(&random_medium(&mut rng, 30), 0.2);
    let b = baseband(&random_medium(&mut rng, 30), 0.2);
    let c = add(&a, &b, 0.7, -1.9);
    let cfg = DASConfig::default();
    let imgs = das_beamform_many(&[&a, &b, &c], &probe, &grid(), &cfg).unwrap();
    let scale = imgs[2].iter().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 0..imgs[0].len() {
        let expected = imgs[0][k] * 0.7 + imgs[1][k] * -1.9;
        assert!((imgs[2][k] - expected).norm() <= 1e-12 * scale);
    }
}

#[test]
fn point_targets_are_localized_within_one_cell() {
    let probe = ProbeConfig::default();
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let (i, j) = (rng.random_range(6..g.n_depth - 6), rng.random_range(4..g.n_angle - 4));
        let target = g.grid_to_cartesian(i, j).unwrap();
        let medium = ScattererMedium::new(vec![target], vec![1.0]).unwrap();
        for angle in make_evenly_spaced_angles(3, 20f64.to_radians()).unwrap() {
            let img = das_beamform(&baseband(&medium, angle), &probe, &g, &DASConfig::default()).unwrap();
            let env = envelope(&img);
            let k = (0..env.len()).max_by(|&a, &b| env.data[a].total_cmp(&env.data[b])).unwrap();
            let (pi, pj) = (k / g.n_angle, k % g.n_angle);
            assert!(pi.abs_diff(i) <= 1 && pj.abs_diff(j) <= 1, "({pi},{pj}) vs ({i},{j})");
        }
    }
}

#[test]
fn compounding_copies_returns_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = grid();
    let samples = (0..g.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let img = IQImage::new(g, samples, 0.25).unwrap();
    for n in [1, 2, 3, 31] {
        let c = compound(&vec![img.clone(); n]).unwrap();
        for (x, y) in c.samples.iter().zip(&img.samples) {
            assert!((x - y).norm() <= 1e-15 * (1.0 + y.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_is_linear_in_reflectivity(seed in any::<u64>(), alpha in -4.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_medium(&mut rng, 12);
        let a = rf(&m, 0.1);
        let b = rf(&m.scaled(alpha), 0.1);
        let (x, y) = (a.rf().unwrap(), b.rf().unwrap());
        let scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (u, v) in x.iter().zip(y) {
            prop_assert!((alpha * u - v).abs() <= 1e-12 * scale * alpha.abs().max(1.0));
        }
    }

    #[test]
    fn rigid_rotation_preserves_pairwise_distances(seed in any::<u64>(), omega in -12.0f64..12.0, dt in 1e-4f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_medium(&mut rng, 20);
        let motion = MotionModel::RigidRotation { center: [0.0, 0.035], omega };
        let moved = advance_medium(&m, &motion, dt).unwrap();
        for i in 0..m.len() {
            for j in 0..i {
                let d0 = (m.positions[i][0] - m.positions[j][0]).hypot(m.positions[i][1] - m.positions[j][1]);
                let d1 = (moved.positions[i][0] - moved.positions[j][0]).hypot(moved.positions[i][1] - moved.positions[j][1]);
                prop_assert!((d0 - d1).abs() <= 1e-9 * d0);
            }
        }
    }

    #[test]
    fn envelope_ignores_global_phase(seed in any::<u64>(), phi in -3.2f64..3.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ScanGrid::new((0.01, 0.02), (-0.2, 0.2), 6, 5).unwrap();
        let samples: Vec<Complex64> = (0..g.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let rot = Complex64::from_polar(1.0, phi);
        let a = envelope(&IQImage::new(g, samples.clone(), 0.0).unwrap());
        let b = envelope(&IQImage::new(g, samples.iter().map(|z| z * rot).collect(), 0.0).unwrap());
        for (x, y) in a.data.iter().zip(&b.data) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn polar_round_trip_on_random_grids(
        r0 in 0.0f64..0.05, dr in 0.01f64..0.1, half in 0.05f64..1.2,
        nd in 2usize..40, na in 2usize..40,
    ) {
        let g = ScanGrid::new((r0, r0 + dr), (-half, half), nd, na).unwrap();
        for i in 0..nd {
            for j in 0..na {
                let p = g.grid_to_cartesian(i, j).unwrap();
                if r0 == 0.0 && i == 0 {
                    continue;
                }
                prop_assert_eq!(g.cartesian_to_grid(p), Some((i, j)));
                let (fi, fj) = g.cartesian_to_fractional(p);
                prop_assert!((fi - i as f64).abs() <= 1e-9 && (fj - j as f64).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn odd_angle_lists_are_symmetric(n in 0usize..20, half in 0.0f64..1.4) {
        let v = make_evenly_spaced_angles(2 * n + 1, half).unwrap();
        for k in 0..v.len() {
            prop_assert!((v[k] + v[v.len() - 1 - k]).abs() <= 1e-15);
        }
        prop_assert_eq!(v[n], 0.0);
    }
}
