//! Finite-difference gradient checks shared by several test targets.
#![allow(dead_code)]

use hdrlab_core::cvnet::layers::*;
use hdrlab_core::cvnet::*;
use hdrlab_core::{Complex64, LcbParams, SeededRng};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rand_c(rng: &mut SeededRng) -> Complex64 {
    Complex64::new(rng.standard_normal(), rng.standard_normal())
}

fn rand_tensor(rng: &mut SeededRng, c: usize, h: usize, w: usize) -> Tensor {
    let mut t = Tensor::zeros(c, h, w);
    t.data.iter_mut().for_each(|v| *v = rand_c(rng));
    t
}

/// `sum Re(conj(c) y)`, whose gradient with respect to `y` is `c`.
fn probe(c: &Tensor, y: &Tensor) -> f64 {
    c.data.iter().zip(&y.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Check 20 random real coordinates of `x` against central differences.
fn check(name: &str, x: &[Complex64], grad: &[Complex64], rng: &mut SeededRng, f: &dyn Fn(&[Complex64]) -> f64) {
    for _ in 0..20 {
        let i = rng.uniform_int(0, x.len() as u64 - 1) as usize;
        let imag = rng.bernoulli(0.5);
        let step = if imag { Complex64::new(0.0, H) } else { Complex64::new(H, 0.0) };
        let mut xp = x.to_vec();
        xp[i] += step;
        let mut xm = x.to_vec();
        xm[i] -= step;
        let fd = (f(&xp) - f(&xm)) / (2.0 * H);
        let an = if imag { grad[i].im } else { grad[i].re };
        assert!(rel_err(fd, an) < TOL, "{name}[{i}{}]: fd {fd} analytic {an}", if imag { "i" } else { "r" });
    }
}

pub fn complex_conv() {
    let mut rng = SeededRng::new(31, 0);
    let (cin, cout, k) = (2, 3, 3);
    let x = rand_tensor(&mut rng, cin, 6, 7);
    let w: Vec<Complex64> = (0..cout * cin * k * k).map(|_| rand_c(&mut rng)).collect();
    let b: Vec<Complex64> = (0..cout).map(|_| rand_c(&mut rng)).collect();
    let c = rand_tensor(&mut rng, cout, 6, 7);
    let g = conv2d_backward(&x, &w, &c, k);
    check("conv.w", &w, &g.weight, &mut rng, &|wp| probe(&c, &conv2d_forward(&x, wp, &b, cout, k)));
    check("conv.b", &b, &g.bias, &mut rng, &|bp| probe(&c, &conv2d_forward(&x, &w, bp, cout, k)));
    check("conv.x", &x.data, &g.input.data, &mut rng, &|xp| {
        let t = Tensor { data: xp.to_vec(), ..x.clone() };
        probe(&c, &conv2d_forward(&t, &w, &b, cout, k))
    });
}

pub fn split_crelu() {
    let mut rng = SeededRng::new(32, 0);
    let x = rand_tensor(&mut rng, 2, 5, 5);
    let c = rand_tensor(&mut rng, 2, 5, 5);
    let g = crelu_backward(&x, &c);
    check("crelu.x", &x.data, &g.data, &mut rng, &|xp| {
        probe(&c, &crelu_forward(&Tensor { data: xp.to_vec(), ..x.clone() }))
    });
}

pub fn magnitude_pool() {
    let mut rng = SeededRng::new(33, 0);
    let x = rand_tensor(&mut rng, 2, 6, 8);
    let (y, arg) = magpool_forward(&x);
    let c = rand_tensor(&mut rng, 2, y.height, y.width);
    let g = magpool_backward((2, 6, 8), &arg, &c);
    check("pool.x", &x.data, &g.data, &mut rng, &|xp| {
        probe(&c, &magpool_forward(&Tensor { data: xp.to_vec(), ..x.clone() }).0)
    });
}

pub fn transposed_conv() {
    let mut rng = SeededRng::new(34, 0);
    let (cin, cout) = (3, 2);
    let x = rand_tensor(&mut rng, cin, 3, 4);
    let w: Vec<Complex64> = (0..cin * cout * 4).map(|_| rand_c(&mut rng)).collect();
    let b: Vec<Complex64> = (0..cout).map(|_| rand_c(&mut rng)).collect();
    let c = rand_tensor(&mut rng, cout, 6, 8);
    let g = convt_backward(&x, &w, &c);
    check("convt.w", &w, &g.weight, &mut rng, &|wp| probe(&c, &convt_forward(&x, wp, &b, cout)));
    check("convt.b", &b, &g.bias, &mut rng, &|bp| probe(&c, &convt_forward(&x, &w, bp, cout)));
    check("convt.x", &x.data, &g.input.data, &mut rng, &|xp| {
        probe(&c, &convt_forward(&Tensor { data: xp.to_vec(), ..x.clone() }, &w, &b, cout))
    });
}

pub fn logistic_head_with_loss() {
    let mut rng = SeededRng::new(35, 0);
    let z = rand_tensor(&mut rng, 1, 5, 6);
    let mask: Vec<f64> = (0..30).map(|i| f64::from(i % 4 == 0)).collect();
    let (s, b) = (0.8, -0.3);
    let loss = |z: &Tensor, s: f64, b: f64| {
        let (p, _) = head_forward(z, s, b);
        weighted_bce(&p, &mask, 3.0).unwrap()
    };
    let (p, mags) = head_forward(&z, s, b);
    let gl = weighted_bce_grad_logit(&p, &mask, 3.0);
    let g = head_backward(&z, &mags, s, &gl);
    check("head.z", &z.data, &g.input.data, &mut rng, &|zp| loss(&Tensor { data: zp.to_vec(), ..z.clone() }, s, b));
    let fd_s = (loss(&z, s + H, b) - loss(&z, s - H, b)) / (2.0 * H);
    let fd_b = (loss(&z, s, b + H) - loss(&z, s, b - H)) / (2.0 * H);
    assert!(rel_err(fd_s, g.scale) < TOL);
    assert!(rel_err(fd_b, g.bias) < TOL);
}

pub fn network_check(cfg: &NetConfig, seed: u64) {
    let net = Network::new(cfg).unwrap();
    let mut p = net.init_params(seed);
    let mut rng = SeededRng::new(seed, 7);
    p.values.iter_mut().for_each(|v| *v += 0.1 * rng.standard_normal());
    let mut x = rand_tensor(&mut rng, 1, 8, 8);
    x.data.iter_mut().for_each(|v| *v *= 3.0);
    let mask: Vec<f64> = (0..64).map(|i| f64::from(i % 9 == 0)).collect();
    let loss = |p: &NetworkParams| {
        let c = net.forward_cached(p, &x).unwrap();
        weighted_bce(&c.probs, &mask, 5.0).unwrap()
    };
    let c = net.forward_cached(&p, &x).unwrap();
    let (g, _) = net.backward(&p, &c, &weighted_bce_grad_logit(&c.probs, &mask, 5.0));
    for _ in 0..20 {
        let i = rng.uniform_int(0, p.len() as u64 - 1) as usize;
        let mut pp = p.clone();
        pp.values[i] += H;
        let lp = loss(&pp);
        pp.values[i] -= 2.0 * H;
        let lm = loss(&pp);
        let fd = (lp - lm) / (2.0 * H);
        assert!(rel_err(fd, g[i]) < TOL, "param {i}: fd {fd} analytic {}", g[i]);
    }
}

pub fn lcb_mid_network() {
    let cfg = NetConfig {
        use_lcb: true,
        lcb_placement: LcbPlacement::Bottleneck,
        lcb: LcbParams::with_w(0.8).unwrap(),
        ..NetConfig::default()
    };
    network_check(&cfg, 41);
    network_check(&NetConfig { depth: 2, ..cfg }, 42);
}

pub fn whole_network_variants() {
    network_check(&NetConfig::default(), 43);
    network_check(
        &NetConfig {
            use_lcb: true,
            lcb: LcbParams::with_w(2.0).unwrap(),
            base_channels: 3,
            ..NetConfig::default()
        },
        44,
    );
}
