use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::numerics::ComplexFrame;

/// Two-dimensional cell-averaging CFAR window.
///
/// Index 0 is the Doppler (row) axis, which wraps; index 1 is the range
/// (column) axis, which is clamped at the frame edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarConfig {
    pub train_cells: [usize; 2],
    pub guard_cells: [usize; 2],
    /// Preset false-alarm rate.
    pub alpha: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            train_cells: [6, 6],
            guard_cells: [2, 2],
            alpha: 1e-4,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.1) {
            return Err(Error::Parameter(format!("alpha {} outside (0, 0.1]", self.alpha)));
        }
        if self.train_cells.iter().any(|&t| t == 0) {
            return Err(Error::Parameter("training cells must be non-zero".into()));
        }
        Ok(())
    }

    fn half_window(&self, axis: usize) -> usize {
        self.train_cells[axis] + self.guard_cells[axis]
    }

    /// Training-cell count away from the range edges.
    pub fn interior_training_cells(&self) -> usize {
        let full = (2 * self.half_window(0) + 1) * (2 * self.half_window(1) + 1);
        let guard = (2 * self.guard_cells[0] + 1) * (2 * self.guard_cells[1] + 1);
        full - guard
    }
}

/// Scale factor `N_t (alpha^{-1/N_t} - 1)` that holds false-alarm rate
/// `alpha` for exponentially distributed cell power.
pub fn threshold_factor(training_cells: usize, alpha: f64) -> f64 {
    let n = training_cells as f64;
    n * (alpha.powf(-1.0 / n) - 1.0)
}

pub fn ca_cfar(rdm: &ComplexFrame, cfg: &CfarConfig) -> Result<DetectionSet> {
    cfg.validate()?;
    let (rows, cols) = rdm.shape();
    let hr = cfg.half_window(0);
    let hc = cfg.half_window(1);
    if 2 * hr + 1 > rows || 2 * hc + 1 > cols {
        return Err(Error::Parameter(format!(
            "CFAR window {}x{} larger than frame {rows}x{cols}",
            2 * hr + 1,
            2 * hc + 1
        )));
    }
    let (gr, gc) = (cfg.guard_cells[0], cfg.guard_cells[1]);

    // prefix sums over rows extended by hr on both sides (Doppler wrap)
    let ext_rows = rows + 2 * hr;
    let w = cols + 1;
    let mut sat = vec![0.0f64; (ext_rows + 1) * w];
    for er in 0..ext_rows {
        let r = (er + rows - hr % rows) % rows;
        let mut run = 0.0;
        for c in 0..cols {
            run += rdm.power(r, c);
            sat[(er + 1) * w + c + 1] = sat[er * w + c + 1] + run;
        }
    }
    let rect = |r0: usize, r1: usize, c0: usize, c1: usize| -> f64 {
        // inclusive extended-row / column bounds
        sat[(r1 + 1) * w + c1 + 1] - sat[r0 * w + c1 + 1] - sat[(r1 + 1) * w + c0] + sat[r0 * w + c0]
    };

    let mut factors: HashMap<usize, f64> = HashMap::new();
    let mut cells = Vec::new();
    for c in 0..cols {
        let c0 = c.saturating_sub(hc);
        let c1 = (c + hc).min(cols - 1);
        let g0 = c.saturating_sub(gc);
        let g1 = (c + gc).min(cols - 1);
        let n_t = (2 * hr + 1) * (c1 - c0 + 1) - (2 * gr + 1) * (g1 - g0 + 1);
        let factor = *factors
            .entry(n_t)
            .or_insert_with(|| threshold_factor(n_t, cfg.alpha));
        for r in 0..rows {
            // cell r sits at extended row r + hr
            let total = rect(r, r + 2 * hr, c0, c1);
            let guard = rect(r + hr - gr, r + hr + gr, g0, g1);
            let estimate = (total - guard).max(0.0) / n_t as f64;
            if estimate <= 0.0 {
                continue;
            }
            let ratio = rdm.power(r, c) / estimate;
            if ratio > factor {
                cells.push(Detection {
                    row: r,
                    col: c,
                    score: ratio,
                });
            }
        }
    }
    Ok(DetectionSet::new(
        cells,
        threshold_factor(cfg.interior_training_cells(), cfg.alpha),
    ))
}
