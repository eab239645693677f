//! Forward and backward passes of the individual layer types.
//!
//! Gradients of complex quantities are stored as `dL/d(re) + j dL/d(im)`,
//! treating real and imaginary parts as independent reals. Under that
//! convention the gradient through `y = w x` is `conj(w) g` for `x` and
//! `conj(x) g` for `w`.

use num_complex::Complex64;

use super::tensor::Tensor;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn conv_index(co: usize, ci: usize, cin: usize, k: usize, ky: usize, kx: usize) -> usize {
    ((co * cin + ci) * k + ky) * k + kx
}

/// Valid output range along one axis for kernel offset `d`.
#[inline]
fn span(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).min(len as isize).max(0) as usize;
    (lo, hi.max(lo))
}

/// Zero-padded "same" complex convolution with odd kernel `k`.
pub fn conv2d_forward(x: &Tensor, w: &[Complex64], b: &[Complex64], cout: usize, k: usize) -> Tensor {
    let cin = x.channels;
    debug_assert_eq!(w.len(), cout * cin * k * k);
    let (h, wd) = (x.height, x.width);
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(cout, h, wd);
    for co in 0..cout {
        let op = out.plane_mut(co);
        op.fill(b[co]);
        for ci in 0..cin {
            let ip = x.plane(ci);
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = span(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = span(wd, dx);
                    let wv = w[conv_index(co, ci, cin, k, ky, kx)];
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize * wd) as isize + dx;
                        let in_row = &ip[(src + x0 as isize) as usize..(src + x1 as isize) as usize];
                        let out_row = &mut op[y * wd + x0..y * wd + x1];
                        for (o, i) in out_row.iter_mut().zip(in_row) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
    out
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Vec<Complex64>,
    pub bias: Vec<Complex64>,
}

pub fn conv2d_backward(x: &Tensor, w: &[Complex64], g: &Tensor, k: usize) -> ConvGrads {
    let cin = x.channels;
    let cout = g.channels;
    let (h, wd) = (x.height, x.width);
    let pad = (k / 2) as isize;
    let mut gin = Tensor::zeros(cin, h, wd);
    let mut gw = vec![ZERO; w.len()];
    let mut gb = vec![ZERO; cout];
    for co in 0..cout {
        let gp = g.plane(co);
        gb[co] = gp.iter().sum();
        for ci in 0..cin {
            let ip = x.plane(ci);
            let gip = gin.plane_mut(ci);
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = span(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = span(wd, dx);
                    let idx = conv_index(co, ci, cin, k, ky, kx);
                    let wc = w[idx].conj();
                    let mut acc = ZERO;
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize * wd) as isize + dx;
                        let lo = (src + x0 as isize) as usize;
                        let hi = (src + x1 as isize) as usize;
                        let g_row = &gp[y * wd + x0..y * wd + x1];
                        for (gi, i) in g_row.iter().zip(&ip[lo..hi]) {
                            acc += gi * i.conj();
                        }
                        for (gi_in, gi) in gip[lo..hi].iter_mut().zip(g_row) {
                            *gi_in += wc * gi;
                        }
                    }
                    gw[idx] = acc;
                }
            }
        }
    }
    ConvGrads {
        input: gin,
        weight: gw,
        bias: gb,
    }
}

/// Split CReLU: ReLU on real and imaginary parts independently.
pub fn crelu_forward(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for z in &mut out.data {
        *z = Complex64::new(z.re.max(0.0), z.im.max(0.0));
    }
    out
}

pub fn crelu_backward(pre: &Tensor, g: &Tensor) -> Tensor {
    let mut out = g.clone();
    for (o, z) in out.data.iter_mut().zip(&pre.data) {
        *o = Complex64::new(
            if z.re > 0.0 { o.re } else { 0.0 },
            if z.im > 0.0 { o.im } else { 0.0 },
        );
    }
    out
}

/// 2x2 down-sampling that keeps the largest-magnitude element of each
/// block. Returns the pooled tensor and, per output element, the flat index
/// of the chosen input element within its channel plane.
pub fn magpool_forward(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (h, w) = (x.height / 2, x.width / 2);
    let mut out = Tensor::zeros(x.channels, h, w);
    let mut arg = vec![0u32; x.channels * h * w];
    for c in 0..x.channels {
        let ip = x.plane(c);
        for y in 0..h {
            for xx in 0..w {
                let mut best = (2 * y) * x.width + 2 * xx;
                let mut best_p = ip[best].norm_sqr();
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = (2 * y + dy) * x.width + 2 * xx + dx;
                    let p = ip[i].norm_sqr();
                    if p > best_p {
                        best_p = p;
                        best = i;
                    }
                }
                let o = c * h * w + y * w + xx;
                out.data[o] = ip[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn magpool_backward(input_shape: (usize, usize, usize), arg: &[u32], g: &Tensor) -> Tensor {
    let (c, h, w) = input_shape;
    let mut out = Tensor::zeros(c, h, w);
    let pn = g.plane_len();
    for ch in 0..c {
        let gp = g.plane(ch);
        let op = out.plane_mut(ch);
        for (i, gi) in gp.iter().enumerate() {
            op[arg[ch * pn + i] as usize] += gi;
        }
    }
    out
}

#[inline]
fn convt_index(ci: usize, co: usize, cout: usize, dy: usize, dx: usize) -> usize {
    ((ci * cout + co) * 2 + dy) * 2 + dx
}

/// 2x2 stride-2 transposed complex convolution (doubles both spatial dims).
pub fn convt_forward(x: &Tensor, w: &[Complex64], b: &[Complex64], cout: usize) -> Tensor {
    let cin = x.channels;
    debug_assert_eq!(w.len(), cin * cout * 4);
    let (h, wd) = (x.height, x.width);
    let (oh, ow) = (2 * h, 2 * wd);
    let mut out = Tensor::zeros(cout, oh, ow);
    for co in 0..cout {
        let op = out.plane_mut(co);
        op.fill(b[co]);
        for ci in 0..cin {
            let ip = x.plane(ci);
            for dy in 0..2 {
                for dx in 0..2 {
                    let wv = w[convt_index(ci, co, cout, dy, dx)];
                    for y in 0..h {
                        let row = (2 * y + dy) * ow;
                        for xx in 0..wd {
                            op[row + 2 * xx + dx] += wv * ip[y * wd + xx];
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn convt_backward(x: &Tensor, w: &[Complex64], g: &Tensor) -> ConvGrads {
    let cin = x.channels;
    let cout = g.channels;
    let (h, wd) = (x.height, x.width);
    let ow = 2 * wd;
    let mut gin = Tensor::zeros(cin, h, wd);
    let mut gw = vec![ZERO; w.len()];
    let gb = (0..cout).map(|co| g.plane(co).iter().sum()).collect();
    for ci in 0..cin {
        let ip = x.plane(ci);
        let gip = gin.plane_mut(ci);
        for co in 0..cout {
            let gp = g.plane(co);
            for dy in 0..2 {
                for dx in 0..2 {
                    let idx = convt_index(ci, co, cout, dy, dx);
                    let wc = w[idx].conj();
                    let mut acc = ZERO;
                    for y in 0..h {
                        let row = (2 * y + dy) * ow;
                        for xx in 0..wd {
                            let gv = gp[row + 2 * xx + dx];
                            acc += gv * ip[y * wd + xx].conj();
                            gip[y * wd + xx] += wc * gv;
                        }
                    }
                    gw[idx] = acc;
                }
            }
        }
    }
    ConvGrads {
        input: gin,
        weight: gw,
        bias: gb,
    }
}

#[inline]
pub fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Head output: `p = logistic(scale |z| + bias)` on a single-channel map.
/// Returns `(p, |z|)` per cell.
pub fn head_forward(z: &Tensor, scale: f64, bias: f64) -> (Vec<f64>, Vec<f64>) {
    let mags: Vec<f64> = z.plane(0).iter().map(|v| v.norm()).collect();
    let probs = mags.iter().map(|&m| logistic(scale * m + bias)).collect();
    (probs, mags)
}

pub struct HeadGrads {
    pub input: Tensor,
    pub scale: f64,
    pub bias: f64,
}

/// Backward through the head given `dL/d(logit)` per cell.
pub fn head_backward(z: &Tensor, mags: &[f64], scale: f64, grad_logit: &[f64]) -> HeadGrads {
    let mut gin = Tensor::zeros(1, z.height, z.width);
    let mut gs = 0.0;
    let mut gb = 0.0;
    for (i, (&ga, &m)) in grad_logit.iter().zip(mags).enumerate() {
        gs += ga * m;
        gb += ga;
        if m > 0.0 {
            gin.data[i] = z.data[i] * (ga * scale / m);
        }
    }
    HeadGrads {
        input: gin,
        scale: gs,
        bias: gb,
    }
}
