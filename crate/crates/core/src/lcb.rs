//! Logarithmic connect block.
//!
//! `LC(x) = x` for `|x| <= w`, and `(w + ln(1 - w + |x|)) e^{j arg x}` above
//! the junction. The map keeps the phase of every element, is continuous at
//! `|x| = w` and has unit radial slope on both sides of it.
//!
//! [`lcb_forward`] evaluates the branch-free masked form (magnitude, mask,
//! clamped log argument, blend, ratio, rescale) that vectorizes without
//! per-element branching. It agrees with [`lc_scalar`] up to the `epsilon`
//! guard in the final ratio.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, NoCount, Tally};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Multiply-accumulates spent per element by the masked kernel.
pub const MACS_PER_ELEMENT: u64 = 11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcbParams {
    /// Junction magnitude (linear amplitude).
    pub w: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl LcbParams {
    pub fn new(w: f64, epsilon: f64) -> Result<Self> {
        let p = Self { w, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn with_w(w: f64) -> Result<Self> {
        Self::new(w, DEFAULT_EPSILON)
    }

    /// Junction placed `db` decibels (power) above a noise floor of
    /// `noise_power` per cell.
    pub fn from_db_above_floor(db: f64, noise_power: f64) -> Result<Self> {
        if !(noise_power > 0.0) {
            return Err(Error::Parameter(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        Self::with_w((noise_power * 10f64.powf(db / 10.0)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(Error::Parameter(format!("w must be > 0, got {}", self.w)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::Parameter(format!(
                "epsilon must lie in (0, 1e-6], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Output magnitude for input magnitude `r`.
#[inline]
pub fn lc_magnitude(r: f64, w: f64) -> f64 {
    if r <= w {
        r
    } else {
        w + (1.0 - w + r).ln()
    }
}

/// Closed-form logarithmic connect function on one element.
pub fn lc_scalar(x: Complex64, p: &LcbParams) -> Complex64 {
    let r = x.norm();
    if r <= p.w {
        x
    } else {
        Complex64::from_polar(lc_magnitude(r, p.w), x.arg())
    }
}

/// Masked kernel on one element.
#[inline(always)]
fn lcb_element<T: Tally>(x: Complex64, w: f64, one_minus_w: f64, eps: f64, t: &mut T) -> Complex64 {
    // R = sqrt(re^2 + im^2)
    let im2 = x.im * x.im;
    let r2 = x.re * x.re + im2;
    t.mac(2);
    let r = r2.sqrt();
    t.transcendental(1);

    // M = [R > w]
    let m = if r > w { 1.0 } else { 0.0 };
    t.compare(1);

    // P = M R + (1 - M) w
    let masked_w = w - m * w;
    let p = m * r + masked_w;
    t.mac(2);

    // L = w + ln(1 - w + P)
    let arg = one_minus_w + p;
    let l = w + arg.ln();
    t.mac(2);
    t.transcendental(1);

    // T = L M + R (1 - M)
    let kept = r - m * r;
    let tv = l * m + kept;
    t.mac(2);

    // S = T / (R + eps)
    let s = tv / (r + eps);
    t.mac(1);

    // O = S X
    t.mac(2);
    Complex64::new(s * x.re, s * x.im)
}

/// Apply the masked kernel from `input` into `output`, tallying into `tally`.
pub fn lcb_apply<T: Tally>(input: &[Complex64], output: &mut [Complex64], p: &LcbParams, tally: &mut T) {
    assert_eq!(input.len(), output.len(), "lcb_apply: length mismatch");
    let one_minus_w = 1.0 - p.w;
    for (o, &x) in output.iter_mut().zip(input) {
        *o = lcb_element(x, p.w, one_minus_w, p.epsilon, tally);
    }
}

pub fn lcb_forward(frame: &ComplexFrame, p: &LcbParams) -> ComplexFrame {
    lcb_forward_tallied(frame, p, &mut NoCount)
}

pub fn lcb_forward_tallied<T: Tally>(frame: &ComplexFrame, p: &LcbParams, tally: &mut T) -> ComplexFrame {
    let mut out = frame.clone();
    lcb_apply(frame.data(), out.data_mut(), p, tally);
    out
}

/// Split-real Jacobian `d(o_re, o_im) / d(x_re, x_im)` of the masked kernel,
/// as `[[do_re/dx_re, do_re/dx_im], [do_im/dx_re, do_im/dx_im]]`.
pub fn lcb_jacobian(x: Complex64, p: &LcbParams) -> [[f64; 2]; 2] {
    let r = (x.re * x.re + x.im * x.im).sqrt();
    let (tv, dt) = if r > p.w {
        let arg = 1.0 - p.w + r;
        (p.w + arg.ln(), 1.0 / arg)
    } else {
        (r, 1.0)
    };
    let den = r + p.epsilon;
    let s = tv / den;
    if r == 0.0 {
        return [[s, 0.0], [0.0, s]];
    }
    let ds = (dt * den - tv) / (den * den);
    // J = s I + ds * x (x / r)^T
    let k = ds / r;
    [
        [s + k * x.re * x.re, k * x.re * x.im],
        [k * x.im * x.re, s + k * x.im * x.im],
    ]
}

/// Pull an upstream gradient back through the kernel.
///
/// Gradients are carried as complex numbers `dL/dre + j dL/dim`.
pub fn lcb_backward_slice(x: &[Complex64], upstream: &[Complex64], grad_in: &mut [Complex64], p: &LcbParams) {
    for ((g_in, &xi), &g) in grad_in.iter_mut().zip(x).zip(upstream) {
        let j = lcb_jacobian(xi, p);
        // grad_x = J^T g
        *g_in = Complex64::new(
            j[0][0] * g.re + j[1][0] * g.im,
            j[0][1] * g.re + j[1][1] * g.im,
        );
    }
}

pub fn lcb_backward(x: &ComplexFrame, upstream: &ComplexFrame, p: &LcbParams) -> Result<ComplexFrame> {
    x.check_same_shape(upstream)?;
    let mut out = x.clone();
    lcb_backward_slice(x.data(), upstream.data(), out.data_mut(), p);
    Ok(out)
}
