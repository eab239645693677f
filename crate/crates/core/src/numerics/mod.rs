//! Complex frames, the 2D DFT, seeded noise and operation tallies.

mod fft;
mod frame;
mod opcount;
mod rng;

pub use fft::{dft2d_exact, fft2d, Fft2d, Radix2Plan};
pub use frame::{ComplexFrame, DomainTag};
pub use opcount::{count_scope, hadamard, NoCount, OpCounter, Tally};
pub use rng::{complex_gaussian_noise, mix64, SeededRng};
