//! Forward 2D DFT, unnormalized, `X[k,l] = sum x[m,n] exp(-j2pi(km/M + ln/N))`.
//!
//! The fast path is an iterative radix-2 transform and requires power-of-two
//! dimensions. [`dft2d_exact`] evaluates the separable direct sums for any
//! size and must be asked for explicitly.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::frame::{ComplexFrame, DomainTag};
use crate::error::{Error, Result};

/// Precomputed radix-2 plan for one transform length.
#[derive(Clone, Debug)]
pub struct Radix2Plan {
    len: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2Plan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "FFT length {len} is not a power of two"
            )));
        }
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform of `buf` (length must equal the plan length).
    pub fn process(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// 2D plan reusable across frames of the same shape.
#[derive(Clone, Debug)]
pub struct Fft2d {
    row_plan: Radix2Plan,
    col_plan: Radix2Plan,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            row_plan: Radix2Plan::new(cols)?,
            col_plan: Radix2Plan::new(rows)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.col_plan.len(), self.row_plan.len())
    }

    pub fn forward(&self, frame: &ComplexFrame) -> Result<ComplexFrame> {
        let mut out = frame.clone();
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn forward_in_place(&self, frame: &mut ComplexFrame) -> Result<()> {
        let (rows, cols) = frame.shape();
        if (rows, cols) != self.shape() {
            return Err(Error::Dimension(format!(
                "plan is {:?}, frame is {rows}x{cols}",
                self.shape()
            )));
        }
        let data = frame.data_mut();
        for row in data.chunks_exact_mut(cols) {
            self.row_plan.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = data[r * cols + c];
            }
            self.col_plan.process(&mut column);
            for (r, v) in column.iter().enumerate() {
                data[r * cols + c] = *v;
            }
        }
        let tag = match frame.tag() {
            DomainTag::Ifs => DomainTag::Rdm,
            t => t,
        };
        frame.set_tag(tag);
        Ok(())
    }
}

/// Unnormalized forward 2D FFT. Dimensions must be powers of two.
pub fn fft2d(frame: &ComplexFrame) -> Result<ComplexFrame> {
    Fft2d::new(frame.rows(), frame.cols())?.forward(frame)
}

/// Separable direct DFT for arbitrary sizes, `O(MN(M+N))`.
pub fn dft2d_exact(frame: &ComplexFrame) -> ComplexFrame {
    let (rows, cols) = frame.shape();
    let row_tw: Vec<Complex64> = (0..cols)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / cols as f64))
        .collect();
    let col_tw: Vec<Complex64> = (0..rows)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / rows as f64))
        .collect();
    let mut tmp = ComplexFrame::zeros(rows, cols, frame.tag());
    for r in 0..rows {
        for l in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..cols {
                acc += frame.get(r, n) * row_tw[(l * n) % cols];
            }
            tmp.set(r, l, acc);
        }
    }
    let tag = match frame.tag() {
        DomainTag::Ifs => DomainTag::Rdm,
        t => t,
    };
    let mut out = ComplexFrame::zeros(rows, cols, tag);
    for k in 0..rows {
        for l in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..rows {
                acc += tmp.get(m, l) * col_tw[(k * m) % rows];
            }
            out.set(k, l, acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zeros_stay_zero() {
        let f = ComplexFrame::zeros(4, 4, DomainTag::Ifs);
        let out = fft2d(&f).unwrap();
        assert!(out.data().iter().all(|z| z.norm() == 0.0));
        assert_eq!(out.tag(), DomainTag::Rdm);
    }

    #[test]
    fn ones_give_dc_impulse() {
        let f = ComplexFrame::from_fn(4, 4, DomainTag::Ifs, |_, _| c(1.0, 0.0));
        let out = fft2d(&f).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let expect = if (r, col) == (0, 0) { 16.0 } else { 0.0 };
                assert!((out.get(r, col) - c(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let f = ComplexFrame::zeros(6, 4, DomainTag::Ifs);
        assert!(matches!(fft2d(&f), Err(Error::Dimension(_))));
        // exact path accepts it
        let out = dft2d_exact(&f);
        assert_eq!(out.shape(), (6, 4));
    }

    #[test]
    fn single_tone_lands_on_its_bin() {
        let (rows, cols) = (8, 16);
        let f = ComplexFrame::from_fn(rows, cols, DomainTag::Ifs, |m, n| {
            Complex64::from_polar(
                1.0,
                2.0 * PI * (3.0 * m as f64 / rows as f64 + 5.0 * n as f64 / cols as f64),
            )
        });
        let out = fft2d(&f).unwrap();
        assert_eq!(out.argmax(), (3, 5));
        assert!((out.get(3, 5).norm() - (rows * cols) as f64).abs() < 1e-9);
    }

    #[test]
    fn length_one_plan() {
        let plan = Radix2Plan::new(1).unwrap();
        let mut buf = [c(2.0, -1.0)];
        plan.process(&mut buf);
        assert_eq!(buf[0], c(2.0, -1.0));
    }
}
