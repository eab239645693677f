use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::eval::{mean_std, Counts, SweepPoint};
use super::{DetectionReport, RunRecord};
use crate::cvnet::write_checkpoint;
use crate::error::{Error, Result};
use crate::lcb::lcb_forward;
use crate::numerics::ComplexFrame;

/// A CSV file read back as strings.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Value of `name` in row `i` parsed as f64 (empty or "nan" give NaN).
    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        let s = &self.rows.get(i)?[self.column(name)?];
        if s.is_empty() {
            return Some(f64::NAN);
        }
        s.parse().ok()
    }
}

pub fn read_csv_table(path: &Path) -> Result<CsvTable> {
    let bad = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut rd = csv::Reader::from_path(path).map_err(bad)?;
    let header = rd.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(bad)?;
    Ok(CsvTable { header, rows })
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let bad = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(bad)?;
    w.write_record(header).map_err(bad)?;
    for r in rows {
        w.write_record(r).map_err(bad)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.4}")
    }
}

fn stat(runs: &[&RunRecord], f: impl Fn(&RunRecord) -> f64) -> (f64, f64) {
    mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>())
}

fn sweep_rows(report: &DetectionReport, pick: fn(&RunRecord) -> &[SweepPoint]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for det in report.detectors() {
        let runs: Vec<&RunRecord> = report.runs_for(&det).collect();
        let gammas: Vec<f64> = runs
            .first()
            .map(|r| pick(r).iter().map(|p| p.gamma_db).collect())
            .unwrap_or_default();
        for (j, g) in gammas.iter().enumerate() {
            let at = |r: &RunRecord, f: fn(&Counts) -> f64| pick(r).get(j).map_or(f64::NAN, |p| f(&p.counts));
            let (pd, pd_sd) = stat(&runs, |r| 100.0 * at(r, Counts::pd));
            let (fa, fa_sd) = stat(&runs, |r| 1e4 * at(r, Counts::pfa));
            rows.push(vec![
                det.clone(),
                format!("{g}"),
                runs.len().to_string(),
                num(pd),
                num(pd_sd),
                num(fa),
                num(fa_sd),
            ]);
        }
    }
    rows
}

const SWEEP_HEADER: [&str; 7] = ["detector", "gamma_db", "seeds", "pd_pct_mean", "pd_pct_std", "pfa_e4_mean", "pfa_e4_std"];

/// Write `tables/`, `figures/`, `manifests/`, `checkpoints/` and
/// `summary.txt` under `dir`.
pub fn render_report(report: &DetectionReport, dir: &Path) -> Result<()> {
    for sub in ["tables", "figures", "manifests", "checkpoints"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let tables = dir.join("tables");
    let alpha = report.alpha;

    let mut overall = Vec::new();
    for det in report.detectors() {
        let runs: Vec<&RunRecord> = report.runs_for(&det).collect();
        let (pd, pd_sd) = stat(&runs, |r| 100.0 * r.eval.overall.pd());
        let (weak, weak_sd) = stat(&runs, |r| 100.0 * r.eval.overall.pd_weak());
        let (strong, strong_sd) = stat(&runs, |r| 100.0 * r.eval.overall.pd_strong());
        let (fa, fa_sd) = stat(&runs, |r| 1e4 * r.eval.overall.pfa());
        let (nfa, _) = stat(&runs, |r| 1e4 * r.eval.noise_pfa);
        let flagged = runs.iter().filter(|r| r.pfa_flagged(alpha)).count();
        let first = runs[0];
        overall.push(vec![
            det.clone(),
            first.param_count.to_string(),
            first.complex_macs.to_string(),
            first.lcb_macs.to_string(),
            runs.len().to_string(),
            num(pd),
            num(pd_sd),
            num(weak),
            num(weak_sd),
            num(strong),
            num(strong_sd),
            num(fa),
            num(fa_sd),
            num(nfa),
            flagged.to_string(),
        ]);
    }
    write_csv(
        &tables.join("table1_overall.csv"),
        &[
            "detector",
            "params",
            "complex_macs",
            "lcb_macs",
            "seeds",
            "pd_pct_mean",
            "pd_pct_std",
            "pd_weak_pct_mean",
            "pd_weak_pct_std",
            "pd_strong_pct_mean",
            "pd_strong_pct_std",
            "pfa_e4_mean",
            "pfa_e4_std",
            "noise_pfa_e4_mean",
            "pfa_flagged_seeds",
        ],
        &overall,
    )?;
    write_csv(&tables.join("table2_weak_snr.csv"), &SWEEP_HEADER, &sweep_rows(report, |r| &r.eval.weak_sweep))?;
    write_csv(&tables.join("table3_strong_snr.csv"), &SWEEP_HEADER, &sweep_rows(report, |r| &r.eval.strong_sweep))?;

    let mut runs = Vec::new();
    let mut bins = Vec::new();
    let mut logs = Vec::new();
    for r in &report.runs {
        let o = &r.eval.overall;
        runs.push(vec![
            r.detector.clone(),
            r.seed.to_string(),
            num(100.0 * o.pd()),
            num(100.0 * o.pd_weak()),
            num(100.0 * o.pd_strong()),
            num(1e4 * o.pfa()),
            num(1e4 * r.eval.noise_pfa),
            u8::from(r.pfa_flagged(alpha)).to_string(),
            format!("{}", r.threshold),
            u8::from(r.threshold_degenerate).to_string(),
            r.best_epoch.to_string(),
            num(r.best_val_loss),
            r.aborted.clone().unwrap_or_default(),
        ]);
        for (lo, (t, h)) in &o.bins {
            bins.push(vec![r.detector.clone(), r.seed.to_string(), lo.to_string(), t.to_string(), h.to_string()]);
        }
        for e in &r.train_log {
            logs.push(vec![
                r.detector.clone(),
                r.seed.to_string(),
                e.epoch.to_string(),
                e.steps.to_string(),
                format!("{}", e.train_loss),
                format!("{}", e.val_loss),
            ]);
        }
        if let (Some(cfg), Some(p)) = (&r.net, &r.params) {
            let name = format!("{}_seed{}.ckpt", r.detector.replace('+', "_").to_lowercase(), r.seed);
            write_checkpoint(&dir.join("checkpoints").join(name), cfg, p)?;
        }
    }
    write_csv(
        &tables.join("runs.csv"),
        &[
            "detector",
            "seed",
            "pd_pct",
            "pd_weak_pct",
            "pd_strong_pct",
            "pfa_e4",
            "noise_pfa_e4",
            "pfa_flagged",
            "threshold",
            "threshold_degenerate",
            "best_epoch",
            "best_val_loss",
            "aborted",
        ],
        &runs,
    )?;
    write_csv(&tables.join("snr_bins.csv"), &["detector", "seed", "bin_lo_db", "targets", "hits"], &bins)?;
    write_csv(
        &tables.join("train_log.csv"),
        &["detector", "seed", "epoch", "steps", "train_loss", "val_loss"],
        &logs,
    )?;

    let manifests = dir.join("manifests");
    let plan_path = manifests.join("plan.toml");
    fs::write(&plan_path, &report.plan_text).map_err(|e| Error::io(&plan_path, e))?;
    for (name, text) in &report.manifests {
        let p = manifests.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }

    if let Some((frame, lcb)) = &report.figure {
        render_heatmap_png(frame, &dir.join("figures").join("rdm_before_lcb.png"))?;
        render_heatmap_png(&lcb_forward(frame, lcb), &dir.join("figures").join("rdm_after_lcb.png"))?;
    }

    let summary = dir.join("summary.txt");
    fs::write(&summary, summary_text(report)).map_err(|e| Error::io(&summary, e))
}

fn pct(v: (f64, f64)) -> String {
    if v.0.is_nan() {
        "n/a".into()
    } else {
        format!("{:.2} +/- {:.2}", v.0, v.1)
    }
}

pub(crate) fn summary_text(report: &DetectionReport) -> String {
    let mut s = String::new();
    let alpha = report.alpha;
    let _ = writeln!(s, "preset alpha: {alpha:e}");
    let _ = writeln!(s, "Pfa denominator: cells outside the truth mask dilated by 2 bins");
    let _ = writeln!(s, "noise-only Pfa band: [{:e}, {:e}]", 0.25 * alpha, 4.0 * alpha);
    if report.runs.is_empty() {
        let _ = writeln!(s, "no runs");
        return s;
    }
    for det in report.detectors() {
        let runs: Vec<&RunRecord> = report.runs_for(&det).collect();
        let _ = writeln!(s, "\n[{det}] seeds: {}", runs.iter().map(|r| r.seed.to_string()).collect::<Vec<_>>().join(","));
        if runs[0].param_count > 0 {
            let _ = writeln!(
                s,
                "  params {}  complex MACs/frame {}  LCB MACs/frame {}",
                runs[0].param_count, runs[0].complex_macs, runs[0].lcb_macs
            );
        }
        let _ = writeln!(s, "  Pd overall (%)    {}", pct(stat(&runs, |r| 100.0 * r.eval.overall.pd())));
        let _ = writeln!(s, "  Pd non-strong (%) {}", pct(stat(&runs, |r| 100.0 * r.eval.overall.pd_weak())));
        let _ = writeln!(s, "  Pd strong (%)     {}", pct(stat(&runs, |r| 100.0 * r.eval.overall.pd_strong())));
        let _ = writeln!(s, "  Pfa (x1e-4)       {}", pct(stat(&runs, |r| 1e4 * r.eval.overall.pfa())));
        for r in &runs {
            let flag = if r.pfa_flagged(alpha) { "  FLAGGED" } else { "" };
            let _ = writeln!(s, "  seed {}: noise-only Pfa {:.3e}{flag}", r.seed, r.eval.noise_pfa);
            if let Some(a) = &r.aborted {
                let _ = writeln!(s, "  seed {}: training aborted: {a}", r.seed);
            }
        }
    }
    s
}

/// Linear-magnitude heatmap, rows top to bottom, scaled to the frame max.
pub fn render_heatmap_png(frame: &ComplexFrame, path: &Path) -> Result<()> {
    let (rows, cols) = frame.shape();
    let peak = frame.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let img = image::GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = frame.get(y as usize, x as usize).norm() * scale;
        image::Luma([v.round().clamp(0.0, 255.0) as u8])
    });
    img.save(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
