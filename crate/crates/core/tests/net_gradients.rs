use dwecho::net::layers::{complex_conv2d_backward, maxout_channels, maxout_channels_backward};
use dwecho::net::{
    amu, complex_conv2d, sample_loss, sample_loss_grad, ArchSpec, ComplexNetwork, ComplexTensor, ConvWeights,
    LayerSpec, Stage,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> ComplexTensor {
    let n = c * h * w;
    ComplexTensor::from_parts(
        c,
        h,
        w,
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, o: usize, i: usize, k: usize) -> ConvWeights {
    let mut w = ConvWeights::zeros(o, i, k);
    for v in w.w_re.iter_mut().chain(w.w_im.iter_mut()).chain(w.b_re.iter_mut()).chain(w.b_im.iter_mut()) {
        *v = rng.random_range(-0.5..0.5);
    }
    w
}

/// Direct expansion into four real correlations.
fn real_expansion(x: &ComplexTensor, w: &ConvWeights) -> ComplexTensor {
    let (h, wd) = (x.h, x.w);
    let p = (w.kernel_size / 2) as isize;
    let mut out = ComplexTensor::zeros(w.out_channels, h, wd);
    for o in 0..w.out_channels {
        for y in 0..h {
            for xx in 0..wd {
                let mut re = w.b_re[o];
                let mut im = w.b_im[o];
                for i in 0..w.in_channels {
                    for ky in 0..w.kernel_size {
                        for kx in 0..w.kernel_size {
                            let sy = y as isize + ky as isize - p;
                            let sx = xx as isize + kx as isize - p;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                continue;
                            }
                            let k = w.kernel_index(o, i, ky, kx);
                            let v = x.get(i, sy as usize, sx as usize);
                            re += w.w_re[k] * v.re - w.w_im[k] * v.im;
                            im += w.w_re[k] * v.im + w.w_im[k] * v.re;
                        }
                    }
                }
                out.set(o, y, xx, Complex64::new(re, im));
            }
        }
    }
    out
}

#[test]
fn conv_matches_real_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_tensor(&mut rng, 2, 7, 6);
    let w = random_weights(&mut rng, 3, 2, 3);
    let a = complex_conv2d(&x, &w).unwrap();
    let b = real_expansion(&x, &w);
    for (u, v) in a.re.iter().chain(&a.im).zip(b.re.iter().chain(&b.im)) {
        assert!((u - v).abs() < 1e-12);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Loss `sum |f(x) - t|^2` of a single conv layer.
fn conv_loss(x: &ComplexTensor, w: &ConvWeights, t: &ComplexTensor) -> f64 {
    sample_loss(&complex_conv2d(x, w).unwrap(), t).unwrap()
}

#[test]
fn conv_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_tensor(&mut rng, 2, 6, 5);
    let w = random_weights(&mut rng, 2, 2, 3);
    let t = random_tensor(&mut rng, 2, 6, 5);
    let y = complex_conv2d(&x, &w).unwrap();
    let g = sample_loss_grad(&y, &t).unwrap();
    let (gx, gw) = complex_conv2d_backward(&x, &w, &g).unwrap();
    let eps = 1e-6;
    for k in [0, 5, 17, 35] {
        for imag in [false, true] {
            let mut wp = w.clone();
            let mut wm = w.clone();
            let (p, m) = if imag { (&mut wp.w_im, &mut wm.w_im) } else { (&mut wp.w_re, &mut wm.w_re) };
            p[k] += eps;
            m[k] -= eps;
            let fd = (conv_loss(&x, &wp, &t) - conv_loss(&x, &wm, &t)) / (2.0 * eps);
            let an = if imag { gw.w_im[k] } else { gw.w_re[k] };
            assert!(rel_err(fd, an) < 1e-4, "w[{k}] {fd} vs {an}");
        }
    }
    for k in [0, 11, 59] {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.im[k] += eps;
        xm.im[k] -= eps;
        let fd = (conv_loss(&xp, &w, &t) - conv_loss(&xm, &w, &t)) / (2.0 * eps);
        assert!(rel_err(fd, gx.im[k]) < 1e-4);
    }
    let mut wp = w.clone();
    let mut wm = w.clone();
    wp.b_re[1] += eps;
    wm.b_re[1] -= eps;
    let fd = (conv_loss(&x, &wp, &t) - conv_loss(&x, &wm, &t)) / (2.0 * eps);
    assert!(rel_err(fd, gw.b_re[1]) < 1e-4);
}

#[test]
fn maxout_routes_gradient_to_selected_branch_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pre = random_tensor(&mut rng, 4, 3, 3);
    let t = random_tensor(&mut rng, 2, 3, 3);
    let (out, idx) = maxout_channels(&pre, 2).unwrap();
    let g = sample_loss_grad(&out, &t).unwrap();
    let gp = maxout_channels_backward(&g, &idx, 2);
    let eps = 1e-6;
    let f = |p: &ComplexTensor| sample_loss(&maxout_channels(p, 2).unwrap().0, &t).unwrap();
    for k in 0..pre.len() {
        let mut a = pre.clone();
        let mut b = pre.clone();
        a.re[k] += eps;
        b.re[k] -= eps;
        let fd = (f(&a) - f(&b)) / (2.0 * eps);
        assert!((fd - gp.re[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", gp.re[k]);
    }
    // a non-selected branch has no influence
    let e = 4;
    let other = if idx[e] == 0 { 1 } else { 0 };
    let mut perturbed = pre.clone();
    perturbed.re[other * 18 + e] *= 0.5;
    assert_eq!(maxout_channels(&perturbed, 2).unwrap().0, out);
    let branches = [pre.channel(0), pre.channel(2)];
    let m = amu(&[&branches[0], &branches[1]]).unwrap();
    for e in 0..m.len() {
        let expected = branches.iter().map(|b| b.re[e].hypot(b.im[e])).fold(0.0, f64::max);
        assert_eq!(m.re[e].hypot(m.im[e]), expected);
    }
}

fn toy_arch() -> ArchSpec {
    ArchSpec {
        input_channels: 3,
        stages: vec![
            Stage::Conv(LayerSpec::new(3, 8, 4).unwrap()),
            Stage::Parallel(vec![LayerSpec::new(3, 4, 4).unwrap(), LayerSpec::new(5, 4, 4).unwrap()]),
            Stage::Conv(LayerSpec::new(1, 4, 4).unwrap()),
        ],
    }
}

fn check_network(net: &ComplexNetwork, seed: u64, h: usize, w: usize, probes: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, 3, h, w);
    let t = random_tensor(&mut rng, 1, h, w);
    let cache = net.forward_cached(&x).unwrap();
    let g = sample_loss_grad(&cache.output, &t).unwrap();
    let (grads, _) = net.backward(&cache, &g).unwrap();
    let analytic = grads.flatten();
    let params = net.parameters();
    let eps = 1e-6;
    let mut probe_net = net.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let k = rng.random_range(0..params.len());
        let mut p = params.clone();
        p[k] += eps;
        probe_net.set_parameters(&p).unwrap();
        let lp = sample_loss(&probe_net.forward(&x).unwrap(), &t).unwrap();
        p[k] -= 2.0 * eps;
        probe_net.set_parameters(&p).unwrap();
        let lm = sample_loss(&probe_net.forward(&x).unwrap(), &t).unwrap();
        let fd = (lp - lm) / (2.0 * eps);
        if fd.abs() < 1e-7 && analytic[k].abs() < 1e-7 {
            continue;
        }
        worst = worst.max(rel_err(fd, analytic[k]));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn toy_network_gradients_match_central_differences() {
    let net = ComplexNetwork::xavier(toy_arch(), 5).unwrap();
    check_network(&net, 6, 8, 8, 60);
}

#[test]
fn reference_layout_gradients_at_quarter_width() {
    let net = ComplexNetwork::xavier(ArchSpec::reference(0.25).unwrap(), 7).unwrap();
    check_network(&net, 8, 8, 8, 40);
}

#[test]
fn last_bias_gradient_is_twice_the_summed_residual() {
    let net = ComplexNetwork::xavier(ArchSpec::reference(0.25).unwrap(), 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = random_tensor(&mut rng, 3, 6, 6);
    let t = random_tensor(&mut rng, 1, 6, 6);
    let cache = net.forward_cached(&x).unwrap();
    let g = sample_loss_grad(&cache.output, &t).unwrap();
    let (grads, _) = net.backward(&cache, &g).unwrap();
    let last = grads.stages.last().unwrap()[0].clone();
    // With 4-piece maxout each output pixel feeds exactly one bias.
    let total_re: f64 = last.b_re.iter().sum();
    let total_im: f64 = last.b_im.iter().sum();
    let res_re: f64 = cache.output.re.iter().zip(&t.re).map(|(a, b)| 2.0 * (a - b)).sum();
    let res_im: f64 = cache.output.im.iter().zip(&t.im).map(|(a, b)| 2.0 * (a - b)).sum();
    assert!((total_re - res_re).abs() < 1e-10);
    assert!((total_im - res_im).abs() < 1e-10);
}

#[test]
fn zero_residual_gives_zero_gradients() {
    let net = ComplexNetwork::xavier(toy_arch(), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_tensor(&mut rng, 3, 5, 5);
    let cache = net.forward_cached(&x).unwrap();
    let g = sample_loss_grad(&cache.output, &cache.output).unwrap();
    let (grads, _) = net.backward(&cache, &g).unwrap();
    assert!(grads.flatten().iter().all(|v| *v == 0.0));
}

#[test]
fn every_stage_preserves_spatial_size_and_scales_to_larger_grids() {
    let net = ComplexNetwork::xavier(ArchSpec::reference(0.25).unwrap(), 13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (h, w) in [(6, 9), (12, 18)] {
        let y = net.forward(&random_tensor(&mut rng, 3, h, w)).unwrap();
        assert_eq!(y.shape(), (1, h, w));
    }
}
