use std::io::Write;
use std::path::Path;

use super::DetectionSet;
use crate::dhdc::{Mask, TargetTruth};
use crate::error::{Error, Result};

/// Radius of the truth-mask dilation outside which detections count as
/// false alarms.
pub const FALSE_ALARM_DILATION: usize = 2;

/// Outcome of matching one frame's detections against its truth.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// One flag per target: any detection within `tol` of any of its peaks.
    pub hits: Vec<bool>,
    /// One flag per detection: within `tol` of some target peak.
    pub detection_hits: Vec<bool>,
    /// Detections outside the dilated truth mask.
    pub false_alarms: usize,
    /// Cells outside the dilated truth mask (the false-alarm denominator).
    pub non_truth_cells: usize,
}

impl MatchResult {
    pub fn detected(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }

    pub fn pfa(&self) -> f64 {
        if self.non_truth_cells == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.non_truth_cells as f64
        }
    }
}

/// Chebyshev distance with wrapping rows.
#[inline]
pub fn cell_distance(a: (usize, usize), b: (usize, usize), rows: usize) -> usize {
    let dr = a.0.abs_diff(b.0);
    dr.min(rows - dr).max(a.1.abs_diff(b.1))
}

pub fn match_truth(
    dets: &DetectionSet,
    truth: &[TargetTruth],
    shape: (usize, usize),
    tol: usize,
) -> MatchResult {
    let (rows, cols) = shape;
    let dilated = Mask::from_truth(rows, cols, truth).dilate(FALSE_ALARM_DILATION);
    let non_truth_cells = rows * cols - dilated.count();
    let mut hits = vec![false; truth.len()];
    let mut detection_hits = vec![false; dets.cells.len()];
    let mut false_alarms = 0;
    for (di, d) in dets.cells.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            if t.peaks.cells().any(|p| cell_distance((d.row, d.col), p, rows) <= tol) {
                hits[ti] = true;
                detection_hits[di] = true;
            }
        }
        if !dilated.get(d.row, d.col) {
            false_alarms += 1;
        }
    }
    MatchResult {
        hits,
        detection_hits,
        false_alarms,
        non_truth_cells,
    }
}

/// Write `frame_id,row,col,score,is_hit` rows.
pub fn write_detections_csv(path: &Path, frames: &[(usize, &DetectionSet, &MatchResult)]) -> Result<()> {
    let mut out = String::from("frame_id,row,col,score,is_hit\n");
    for (id, dets, m) in frames {
        for (d, hit) in dets.cells.iter().zip(&m.detection_hits) {
            out.push_str(&format!("{id},{},{},{},{}\n", d.row, d.col, d.score, hit));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
