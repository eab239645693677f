//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream_id)`; the ChaCha block counter
//! is the index. Parallel work gets one stream per work item, so results do
//! not depend on scheduling.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::frame::{ComplexFrame, DomainTag};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer, used to decorrelate derived stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent child stream keyed by `tag`; does not advance `self`.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(self.seed, mix64(self.stream_id ^ mix64(tag)))
    }

    /// Position of the next output word within the stream.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Integer drawn uniformly from `lo..=hi`.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random::<f64>() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Circularly-symmetric complex Gaussian frame with `E|z|^2 = sigma2`.
pub fn complex_gaussian_noise(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    sigma2: f64,
    tag: DomainTag,
) -> Result<ComplexFrame> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Parameter(format!(
            "noise power must be positive, got {sigma2}"
        )));
    }
    let sd = (sigma2 / 2.0).sqrt();
    Ok(ComplexFrame::from_fn(rows, cols, tag, |_, _| {
        let re = rng.standard_normal();
        let im = rng.standard_normal();
        Complex64::new(sd * re, sd * im)
    }))
}
