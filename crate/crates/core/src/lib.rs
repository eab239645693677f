//! High-dynamic-range radar detection laboratory.
//!
//! The crate covers the whole chain: DDMA-MIMO LFMCW range-Doppler map
//! synthesis ([`signal`]), the phase-preserving logarithmic connect block
//! ([`lcb`]), mixed strong/weak dataset construction ([`dhdc`]), classical
//! CA-CFAR and probability-map deciders ([`detector`]), a small
//! complex-valued UNet ([`cvnet`]) and the experiment harness
//! ([`harness`]) that compares training modes.

pub mod config;
pub mod cvnet;
pub mod detector;
pub mod dhdc;
pub mod error;
pub mod harness;
pub mod lcb;
pub mod numerics;
pub mod signal;

pub use error::{Error, Result};
pub use lcb::LcbParams;
pub use num_complex::Complex64;
pub use numerics::{ComplexFrame, DomainTag, OpCounter, SeededRng};
pub use signal::{PeakPrediction, RadarConfig, TargetSpec};
