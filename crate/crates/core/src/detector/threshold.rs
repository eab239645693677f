use super::{Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, DomainTag};

/// Probability cut-off calibrated on noise-only maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbThreshold {
    pub threshold: f64,
    pub alpha: f64,
    /// Calibration cells pooled.
    pub cells: usize,
    /// Calibration cells strictly above the threshold.
    pub calibration_alarms: usize,
    /// Several calibration cells tie at the threshold, so the target rate
    /// cannot be met exactly.
    pub degenerate: bool,
}

/// Empirical `(1 - alpha)` quantile of cell probabilities on noise maps.
///
/// Deciding "detect iff p > threshold" then alarms on at most
/// `floor(alpha * cells)` calibration cells.
pub fn calibrate_prob_threshold(maps: &[ComplexFrame], alpha: f64) -> Result<ProbThreshold> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(m) = maps.iter().find(|m| m.tag() != DomainTag::ProbMap) {
        return Err(Error::Calibration(format!(
            "calibration maps must be probability maps, got {:?}",
            m.tag()
        )));
    }
    let mut values: Vec<f64> = maps.iter().flat_map(|m| m.data().iter().map(|z| z.re)).collect();
    let n = values.len();
    let needed = (100.0 / alpha).ceil() as usize;
    if n < needed {
        return Err(Error::Calibration(format!(
            "{n} calibration cells, at least {needed} required for alpha = {alpha}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration("non-finite probability".into()));
    }
    values.sort_by(f64::total_cmp);
    let k = (alpha * n as f64).floor() as usize;
    let threshold = values[n - k - 1];
    let calibration_alarms = values.iter().rev().take_while(|&&v| v > threshold).count();
    let ties = values.iter().filter(|&&v| v == threshold).count();
    Ok(ProbThreshold {
        threshold,
        alpha,
        cells: n,
        calibration_alarms,
        degenerate: ties > 1,
    })
}

/// Cells whose probability exceeds `threshold`.
pub fn detect_prob(map: &ComplexFrame, threshold: f64) -> DetectionSet {
    let cols = map.cols();
    let cells = map
        .data()
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re > threshold)
        .map(|(i, z)| Detection {
            row: i / cols,
            col: i % cols,
            score: z.re,
        })
        .collect();
    DetectionSet::new(cells, threshold)
}
