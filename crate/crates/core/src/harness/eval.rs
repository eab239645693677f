use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::MatchResult;
use crate::dhdc::TargetTruth;

/// Width of the SNR bins in the overall breakdown (dB).
pub const SNR_BIN_DB: f64 = 3.0;

/// Pooled detection counts over a set of frames.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub frames: usize,
    pub targets: usize,
    pub hits: usize,
    pub strong_targets: usize,
    pub strong_hits: usize,
    pub weak_targets: usize,
    pub weak_hits: usize,
    pub false_alarms: usize,
    pub non_truth_cells: usize,
    /// (targets, hits) per SNR bin, keyed by the bin's lower edge in dB.
    pub bins: BTreeMap<i64, (usize, usize)>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

impl Counts {
    pub fn add(&mut self, truth: &[TargetTruth], m: &MatchResult) {
        self.frames += 1;
        for (t, &hit) in truth.iter().zip(&m.hits) {
            let h = usize::from(hit);
            self.targets += 1;
            self.hits += h;
            if t.is_strong {
                self.strong_targets += 1;
                self.strong_hits += h;
            } else {
                self.weak_targets += 1;
                self.weak_hits += h;
            }
            let bin = ((t.spec.gamma_db / SNR_BIN_DB).floor() * SNR_BIN_DB) as i64;
            let e = self.bins.entry(bin).or_default();
            e.0 += 1;
            e.1 += h;
        }
        self.false_alarms += m.false_alarms;
        self.non_truth_cells += m.non_truth_cells;
    }

    pub fn merge(&mut self, other: &Counts) {
        self.frames += other.frames;
        self.targets += other.targets;
        self.hits += other.hits;
        self.strong_targets += other.strong_targets;
        self.strong_hits += other.strong_hits;
        self.weak_targets += other.weak_targets;
        self.weak_hits += other.weak_hits;
        self.false_alarms += other.false_alarms;
        self.non_truth_cells += other.non_truth_cells;
        for (k, v) in &other.bins {
            let e = self.bins.entry(*k).or_default();
            e.0 += v.0;
            e.1 += v.1;
        }
    }

    /// Detection probability; NaN when there were no targets.
    pub fn pd(&self) -> f64 {
        ratio(self.hits, self.targets)
    }

    pub fn pd_strong(&self) -> f64 {
        ratio(self.strong_hits, self.strong_targets)
    }

    pub fn pd_weak(&self) -> f64 {
        ratio(self.weak_hits, self.weak_targets)
    }

    pub fn pfa(&self) -> f64 {
        if self.non_truth_cells == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.non_truth_cells as f64
        }
    }
}

/// Detection counts at one fixed SNR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma_db: f64,
    pub counts: Counts,
}

/// Mean and sample standard deviation, ignoring NaN entries.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
