use dwecho::beamform::envelope;
use dwecho::track::{
    estimates_to_field, ncc_map, subpixel_peak, track_images, track_pair, track_sequence, TrackConfig,
};
use dwecho::{IQImage, RealImage, ScanGrid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Band-limited random texture with speckle-sized grains (3 to 10 pixels),
/// sampled at any real position.
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        Self::with_band(seed, 0.10, 0.30)
    }

    /// Spatial frequencies in `[lo, hi)` cycles per pixel.
    fn with_band(seed: u64, lo: f64, hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..24)
            .map(|_| {
                let f = rng.random_range(lo..hi);
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                (f * a.cos(), f * a.sin(), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.5..1.0))
            })
            .collect();
        Self { waves }
    }

    fn at(&self, y: f64, x: f64) -> f64 {
        4.0 + self
            .waves
            .iter()
            .map(|&(u, v, phi, amp)| amp * (std::f64::consts::TAU * (u * y + v * x) + phi).cos())
            .sum::<f64>()
    }

    /// `img(i, j) = tex(i - sy, j - sx)`: content moved by `(sy, sx)`.
    fn image(&self, rows: usize, cols: usize, sy: f64, sx: f64) -> RealImage {
        RealImage::from_fn(rows, cols, |i, j| self.at(i as f64 - sy, j as f64 - sx))
    }
}

fn random_block(rng: &mut ChaCha8Rng, n: usize) -> RealImage {
    RealImage::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn direct_ncc(a: &RealImage, b: &RealImage, ly: isize, lx: isize) -> f64 {
    let n = a.len() as f64;
    let ma = a.data.iter().sum::<f64>() / n;
    let mb = b.data.iter().sum::<f64>() / n;
    let (mut num, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let bi = (i as isize + ly).rem_euclid(a.rows as isize) as usize;
            let bj = (j as isize + lx).rem_euclid(a.cols as isize) as usize;
            num += (a.at(i, j) - ma) * (b.at(bi, bj) - mb);
        }
    }
    for (x, y) in a.data.iter().zip(&b.data) {
        ea += (x - ma).powi(2);
        eb += (y - mb).powi(2);
    }
    num / (ea * eb).sqrt()
}

#[test]
fn fft_ncc_matches_direct_sum_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_block(&mut rng, 16);
        let b = random_block(&mut rng, 16);
        let s = ncc_map(&a, &b).unwrap();
        for ly in -8..8 {
            for lx in -8..8 {
                worst = worst.max((s.at_lag(ly, lx) - direct_ncc(&a, &b, ly, lx)).abs());
            }
        }
    }
    assert!(worst < 1e-10, "worst deviation {worst}");
}

#[test]
fn circular_shift_peaks_at_the_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let a = random_block(&mut rng, 16);
    let b = RealImage::from_fn(16, 16, |i, j| a.at((i + 16 - 3) % 16, (j + 2) % 16));
    let (ly, lx, c) = ncc_map(&a, &b).unwrap().peak(8);
    assert_eq!((ly, lx), (3, -2));
    assert!((c - 1.0).abs() < 1e-12);
}

/// Sinusoids with a whole number of periods per block, so shifting is exact
/// under circular correlation.
fn periodic_sinusoid(n: usize, sy: f64, sx: f64) -> RealImage {
    let w = std::f64::consts::TAU / n as f64;
    RealImage::from_fn(n, n, |i, j| {
        (2.0 * w * (i as f64 - sy) + 0.4).cos() + (w * (j as f64 - sx) - 1.1).cos()
    })
}

#[test]
fn subpixel_sinusoid_shift_is_recovered() {
    for &(sy, sx) in &[(0.3, 0.0), (0.0, 0.3), (0.3, -0.4), (-0.25, 0.15), (0.45, 0.05)] {
        let a = periodic_sinusoid(16, 0.0, 0.0);
        let b = periodic_sinusoid(16, sy, sx);
        let (dy, dx, _) = ncc_map(&a, &b).unwrap().refined_peak(4);
        assert!((dy - sy).abs() < 0.1 && (dx - sx).abs() < 0.1, "({dy}, {dx}) vs ({sy}, {sx})");
    }
}

#[test]
fn translation_of_one_and_a_half_cells_is_tracked() {
    let tex = Texture::new(300);
    let g = grid(96, 96);
    let a = iq(&tex.image(96, 96, 0.0, 0.0), g, 0.0);
    let b = iq(&tex.image(96, 96, 0.0, 1.5), g, 1e-3);
    let est = track_images(&envelope(&a), &envelope(&b), &TrackConfig::default()).unwrap();
    let valid: Vec<usize> = (0..est.valid.len()).filter(|&k| est.valid[k]).collect();
    assert!(valid.len() * 10 >= est.valid.len() * 9);
    let mean_dy = valid.iter().map(|&k| est.dy[k]).sum::<f64>() / valid.len() as f64;
    let mean_dx = valid.iter().map(|&k| est.dx[k]).sum::<f64>() / valid.len() as f64;
    assert!(mean_dy.abs() < 0.1 && (mean_dx - 1.5).abs() < 0.1, "{mean_dy} {mean_dx}");
    assert!(track_pair(&a, &b, &TrackConfig::default()).unwrap().valid_count() == valid.len());
}

fn mean_shift(est: &dwecho::track::WindowEstimates) -> (f64, f64) {
    let valid: Vec<usize> = (0..est.valid.len()).filter(|&k| est.valid[k]).collect();
    let n = valid.len() as f64;
    (
        valid.iter().map(|&k| est.dy[k]).sum::<f64>() / n,
        valid.iter().map(|&k| est.dx[k]).sum::<f64>() / n,
    )
}

#[test]
fn refinement_passes_remove_the_zero_lag_bias() {
    // grains wider than the window make a single circular NCC lag behind
    let tex = Texture::with_band(41, 0.06, 0.14);
    let a = tex.image(96, 96, 0.0, 0.0);
    let b = tex.image(96, 96, 0.35, -0.25);
    let err = |refinements| {
        let cfg = TrackConfig {
            window_sizes: vec![8],
            search_margin: vec![2],
            refinements,
            ..TrackConfig::default()
        };
        let (dy, dx) = mean_shift(&track_images(&a, &b, &cfg).unwrap());
        (dy - 0.35).hypot(dx + 0.25)
    };
    let (one, three) = (err(1), err(3));
    assert!(three < 0.5 * one, "one pass {one}, three passes {three}");
}

fn grid(rows: usize, cols: usize) -> ScanGrid {
    ScanGrid::new((0.02, 0.06), (-0.4, 0.4), rows, cols).unwrap()
}

fn iq(img: &RealImage, grid: ScanGrid, t: f64) -> IQImage {
    IQImage::new(grid, img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(), t).unwrap()
}

#[test]
fn identical_frames_give_exactly_zero_fields() {
    let tex = Texture::new(400);
    let g = grid(64, 64);
    let f = iq(&tex.image(64, 64, 0.0, 0.0), g, 0.0);
    let frames = vec![f.clone(), IQImage { frame_time: 1e-3, ..f.clone() }, IQImage { frame_time: 2e-3, ..f }];
    let fields = track_sequence(&frames, &TrackConfig::default()).unwrap();
    assert_eq!(fields.len(), 2);
    for field in fields {
        assert!(field.vectors.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        assert!((field.interframe_dt - 1e-3).abs() < 1e-15);
    }
    assert!(track_sequence(&frames_of(&tex, 1), &TrackConfig::default()).is_err());
}

fn frames_of(tex: &Texture, n: usize) -> Vec<IQImage> {
    let g = grid(64, 64);
    (0..n).map(|k| iq(&tex.image(64, 64, 0.8 * k as f64, 0.5 * k as f64), g, k as f64 * 1e-3)).collect()
}

#[test]
fn constant_velocity_gives_equal_fields_and_reversal_negates() {
    let tex = Texture::new(500);
    let frames = frames_of(&tex, 3);
    let cfg = TrackConfig::default();
    let fields = track_sequence(&frames, &cfg).unwrap();
    let both = |a: usize, k: usize| fields[a].mask[k] && fields[1 - a].mask[k];
    let n = fields[0].len();
    let mut diff = 0.0;
    let mut count = 0;
    for k in 0..n {
        if both(0, k) {
            let (u, v) = (fields[0].vectors[k], fields[1].vectors[k]);
            diff += (u[0] - v[0]).hypot(u[1] - v[1]);
            count += 1;
        }
    }
    let step = frames[0].grid.depth_step();
    assert!(count > n / 2);
    assert!(diff / (count as f64) < 0.1 * step);

    let back = track_pair(&frames[1], &frames[0], &cfg).unwrap();
    let fwd = &fields[0];
    let mut err = 0.0;
    let mut m = 0;
    for k in 0..n {
        if back.mask[k] && fwd.mask[k] {
            err += (back.vectors[k][0] + fwd.vectors[k][0]).hypot(back.vectors[k][1] + fwd.vectors[k][1]);
            m += 1;
        }
    }
    assert!(m > n / 2);
    assert!(err / (m as f64) < 0.1 * step, "{}", err / m as f64);
}

#[test]
fn lateral_flip_negates_lateral_displacement() {
    // 64 columns keep every level's window lattice mirror symmetric.
    let tex = Texture::new(600);
    let a = tex.image(64, 64, 0.0, 0.0);
    let b = tex.image(64, 64, 0.7, 1.3);
    let flip = |img: &RealImage| RealImage::from_fn(img.rows, img.cols, |i, j| img.at(i, img.cols - 1 - j));
    let cfg = TrackConfig::default();
    let e = track_images(&a, &b, &cfg).unwrap();
    let f = track_images(&flip(&a), &flip(&b), &cfg).unwrap();
    let nx = e.lattice.nx;
    for k in 0..e.dy.len() {
        let (r, c) = (k / nx, k % nx);
        let m = r * nx + (nx - 1 - c);
        assert_eq!(e.valid[k], f.valid[m]);
        assert!((e.dy[k] - f.dy[m]).abs() < 1e-9);
        assert!((e.dx[k] + f.dx[m]).abs() < 1e-9);
    }
}

#[test]
fn zero_pixel_displacement_maps_to_zero_vector() {
    let tex = Texture::new(700);
    let a = tex.image(40, 40, 0.0, 0.0);
    let est = track_images(&a, &a, &TrackConfig::default()).unwrap();
    let field = estimates_to_field(&est, &grid(40, 40), 1e-3).unwrap();
    assert!(field.vectors.iter().all(|v| *v == [0.0, 0.0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ncc_values_stay_in_unit_range(seed in any::<u64>(), n in 4usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_block(&mut rng, n);
        let b = random_block(&mut rng, n);
        let s = ncc_map(&a, &b).unwrap();
        prop_assert!(s.values.data.iter().all(|v| *v >= -1.0 - 1e-9 && *v <= 1.0 + 1e-9));
    }

    #[test]
    fn subpixel_offsets_are_bounded(cm in -1.0f64..1.0, c0 in -1.0f64..1.0, cp in -1.0f64..1.0) {
        let d = subpixel_peak(cm, c0, cp);
        prop_assert!((-0.5..=0.5).contains(&d));
    }
}
