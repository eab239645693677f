//! Decision stage: CA-CFAR, calibrated probability thresholds and truth
//! matching.

mod cfar;
mod matching;
mod threshold;

pub use cfar::{ca_cfar, threshold_factor, CfarConfig};
pub use matching::{cell_distance, match_truth, write_detections_csv, MatchResult, FALSE_ALARM_DILATION};
pub use threshold::{calibrate_prob_threshold, detect_prob, ProbThreshold};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

/// Detections sorted by descending score.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionSet {
    pub cells: Vec<Detection>,
    pub threshold_used: f64,
}

impl DetectionSet {
    pub fn new(mut cells: Vec<Detection>, threshold_used: f64) -> Self {
        cells.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.row.cmp(&b.row))
                .then(a.col.cmp(&b.col))
        });
        cells.dedup_by(|a, b| a.row == b.row && a.col == b.col);
        Self {
            cells,
            threshold_used,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}
