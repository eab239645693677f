use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, DomainTag};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Channel-major complex feature map `[channels][height][width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![ZERO; channels * height * width],
        }
    }

    pub fn from_frame(frame: &ComplexFrame) -> Self {
        Self {
            channels: 1,
            height: frame.rows(),
            width: frame.cols(),
            data: frame.data().to_vec(),
        }
    }

    /// Channel 0 as a frame with the given tag.
    pub fn to_frame(&self, tag: DomainTag) -> Result<ComplexFrame> {
        ComplexFrame::from_vec(self.height, self.width, self.plane(0).to_vec(), tag)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[Complex64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }

    pub fn check_shape(&self, channels: usize, height: usize, width: usize) -> Result<()> {
        if (self.channels, self.height, self.width) != (channels, height, width) {
            return Err(Error::Dimension(format!(
                "tensor is {}x{}x{}, expected {channels}x{height}x{width}",
                self.channels, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Centre crop to `height` x `width`.
    pub fn centre_crop(&self, height: usize, width: usize) -> Result<Tensor> {
        if height > self.height || width > self.width {
            return Err(Error::Dimension(format!(
                "cannot crop {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let (oy, ox) = ((self.height - height) / 2, (self.width - width) / 2);
        let mut out = Tensor::zeros(self.channels, height, width);
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = out.plane_mut(c);
            for y in 0..height {
                dst[y * width..(y + 1) * width]
                    .copy_from_slice(&src[(y + oy) * self.width + ox..(y + oy) * self.width + ox + width]);
            }
        }
        Ok(out)
    }

    /// Scatter a cropped gradient back into a zero tensor of this shape.
    pub fn uncrop(&self, grad: &Tensor) -> Tensor {
        let (oy, ox) = ((self.height - grad.height) / 2, (self.width - grad.width) / 2);
        let mut out = Tensor::zeros(self.channels, self.height, self.width);
        for c in 0..grad.channels {
            let src = grad.plane(c);
            let w = self.width;
            let dst = out.plane_mut(c);
            for y in 0..grad.height {
                dst[(y + oy) * w + ox..(y + oy) * w + ox + grad.width]
                    .copy_from_slice(&src[y * grad.width..(y + 1) * grad.width]);
            }
        }
        out
    }

    pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if (a.height, a.width) != (b.height, b.width) {
            return Err(Error::Dimension("concat spatial mismatch".into()));
        }
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Ok(Tensor {
            channels: a.channels + b.channels,
            height: a.height,
            width: a.width,
            data,
        })
    }

    /// Inverse of [`Tensor::concat`] with `first` leading channels.
    pub fn split(&self, first: usize) -> (Tensor, Tensor) {
        let n = first * self.plane_len();
        (
            Tensor {
                channels: first,
                height: self.height,
                width: self.width,
                data: self.data[..n].to_vec(),
            },
            Tensor {
                channels: self.channels - first,
                height: self.height,
                width: self.width,
                data: self.data[n..].to_vec(),
            },
        )
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
