use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;
const MAX_POS_WEIGHT: f64 = 1000.0;

/// Weight applied to positive cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosWeight {
    /// cells / positives, clamped to [1, 1000]; 1 for an empty mask.
    #[default]
    Auto,
    Fixed(f64),
}

impl PosWeight {
    pub fn resolve(self, mask: &[f64]) -> f64 {
        match self {
            PosWeight::Fixed(w) => w,
            PosWeight::Auto => {
                let pos = mask.iter().filter(|&&m| m > 0.5).count();
                if pos == 0 {
                    1.0
                } else {
                    (mask.len() as f64 / pos as f64).clamp(1.0, MAX_POS_WEIGHT)
                }
            }
        }
    }
}

/// Mean weighted binary cross-entropy over all cells.
pub fn weighted_bce(prob: &[f64], mask: &[f64], pos_weight: f64) -> Result<f64> {
    if prob.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "probability map has {} cells, mask {}",
            prob.len(),
            mask.len()
        )));
    }
    if prob.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = prob
        .iter()
        .zip(mask)
        .map(|(&p, &y)| {
            -(pos_weight * y * p.max(LOG_FLOOR).ln() + (1.0 - y) * (1.0 - p).max(LOG_FLOOR).ln())
        })
        .sum();
    Ok(total / prob.len() as f64)
}

/// Gradient of [`weighted_bce`] with respect to each cell's logit.
pub fn weighted_bce_grad_logit(prob: &[f64], mask: &[f64], pos_weight: f64) -> Vec<f64> {
    let n = prob.len().max(1) as f64;
    prob.iter()
        .zip(mask)
        .map(|(&p, &y)| (pos_weight * y * (p - 1.0) + (1.0 - y) * p) / n)
        .collect()
}
