//! Arithmetic tallies for auditing kernel cost.
//!
//! Kernels are generic over [`Tally`]. Production call sites pass
//! [`NoCount`], whose methods are empty and inline away; audits pass an
//! [`OpCounter`].
//!
//! One multiply-accumulate pairs one multiplication (or division) with one
//! addition. A lone multiplication or addition also counts as one.

use std::ops::{Add, AddAssign, Sub};

pub trait Tally {
    fn mac(&mut self, n: u64);
    fn compare(&mut self, n: u64);
    fn transcendental(&mut self, n: u64);
}

/// Tally that records nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoCount;

impl Tally for NoCount {
    #[inline(always)]
    fn mac(&mut self, _: u64) {}
    #[inline(always)]
    fn compare(&mut self, _: u64) {}
    #[inline(always)]
    fn transcendental(&mut self, _: u64) {}
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub mul_adds: u64,
    pub comparisons: u64,
    pub transcendental_calls: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    /// Run `op` against a fresh child counter, fold the child into `self`
    /// and return the child (the delta attributable to `op`).
    ///
    /// Scopes nest: a scope opened inside `op` folds into the child, which
    /// then folds into `self`, so totals compose additively.
    pub fn scope<R>(&mut self, op: impl FnOnce(&mut OpCounter) -> R) -> (R, OpCounter) {
        let mut child = OpCounter::new();
        let out = op(&mut child);
        *self += child;
        (out, child)
    }
}

/// Count the operations performed by `op` from zero.
pub fn count_scope<R>(op: impl FnOnce(&mut OpCounter) -> R) -> (R, OpCounter) {
    OpCounter::new().scope(op)
}

impl Tally for OpCounter {
    #[inline]
    fn mac(&mut self, n: u64) {
        self.mul_adds += n;
    }
    #[inline]
    fn compare(&mut self, n: u64) {
        self.comparisons += n;
    }
    #[inline]
    fn transcendental(&mut self, n: u64) {
        self.transcendental_calls += n;
    }
}

impl Add for OpCounter {
    type Output = OpCounter;
    fn add(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            mul_adds: self.mul_adds + rhs.mul_adds,
            comparisons: self.comparisons + rhs.comparisons,
            transcendental_calls: self.transcendental_calls + rhs.transcendental_calls,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounter {
    type Output = OpCounter;
    /// Saturating difference; counters never run backwards inside a scope.
    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            mul_adds: self.mul_adds.saturating_sub(rhs.mul_adds),
            comparisons: self.comparisons.saturating_sub(rhs.comparisons),
            transcendental_calls: self
                .transcendental_calls
                .saturating_sub(rhs.transcendental_calls),
        }
    }
}

/// Elementwise product of two real slices, tallied (one MAC per element).
pub fn hadamard<T: Tally>(a: &[f64], b: &[f64], tally: &mut T) -> Vec<f64> {
    tally.mac(a.len().min(b.len()) as u64);
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
