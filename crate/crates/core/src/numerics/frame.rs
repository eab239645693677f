use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a [`ComplexFrame`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainTag {
    /// Intermediate-frequency signal: pulses (rows) by fast-time samples (cols).
    Ifs,
    /// Range-Doppler map: Doppler bins (rows) by range bins (cols).
    Rdm,
    /// Per-cell detection probability (real part only).
    ProbMap,
}

impl DomainTag {
    pub fn code(self) -> u8 {
        match self {
            DomainTag::Ifs => 0,
            DomainTag::Rdm => 1,
            DomainTag::ProbMap => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DomainTag::Ifs),
            1 => Some(DomainTag::Rdm),
            2 => Some(DomainTag::ProbMap),
            _ => None,
        }
    }
}

/// Dense row-major complex matrix.
///
/// Row index is the pulse / Doppler index `m`, column index the fast-time /
/// range index `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFrame {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    tag: DomainTag,
}

impl ComplexFrame {
    pub fn zeros(rows: usize, cols: usize, tag: DomainTag) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
            tag,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>, tag: DomainTag) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            tag,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        tag: DomainTag,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            data,
            tag,
        }
    }

    /// Probability map from real values; imaginary parts are zero.
    pub fn from_real(rows: usize, cols: usize, values: &[f64], tag: DomainTag) -> Result<Self> {
        let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_vec(rows, cols, data, tag)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn set_tag(&mut self, tag: DomainTag) {
        self.tag = tag;
    }

    pub fn with_tag(mut self, tag: DomainTag) -> Self {
        self.tag = tag;
        self
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn power(&self, row: usize, col: usize) -> f64 {
        self.get(row, col).norm_sqr()
    }

    /// `|x|^2` for every cell, row-major.
    pub fn powers(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!("non-finite value in {context}")))
        }
    }

    pub fn check_same_shape(&self, other: &ComplexFrame) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &ComplexFrame) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ComplexFrame, scale: Complex64) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    /// Index of the cell with the largest magnitude.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (i, z) in self.data.iter().enumerate() {
            let p = z.norm_sqr();
            if p > best_p {
                best_p = p;
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }

    /// Rectangular sub-frame with top-left corner at (`row0`, `col0`).
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::Dimension(format!(
                "crop {rows}x{cols}@({row0},{col0}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(Self::from_fn(rows, cols, self.tag, |r, c| {
            self.get(row0 + r, col0 + c)
        }))
    }
}
