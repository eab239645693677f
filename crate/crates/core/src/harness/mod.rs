//! Desk-scale reproduction of the MM / NTM / MM+LCB training-mode
//! comparison.

mod eval;
mod report;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use eval::{mean_std, Counts, SweepPoint, SNR_BIN_DB};
pub use report::{read_csv_table, render_report, render_heatmap_png, CsvTable};

use crate::cvnet::{train, EpochLog, Network, NetConfig, NetworkParams, TrainConfig};
use crate::detector::{
    ca_cfar, calibrate_prob_threshold, detect_prob, match_truth, CfarConfig, DetectionSet, ProbThreshold,
};
use crate::dhdc::{
    build_frame, frame_stream, generate_dataset, quantize_f32, sample_scenario, DataMode, DatasetManifest,
    DhdcParams, LabeledFrame, Split,
};
use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, Fft2d, SeededRng};
use crate::signal::{RadarConfig, TargetSpec};

/// Training mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Mixed strong and weak targets.
    #[serde(rename = "MM")]
    Mm,
    /// Weak targets only.
    #[serde(rename = "NTM")]
    Ntm,
    /// Mixed targets with the LCB in front of the network.
    #[serde(rename = "MM_LCB")]
    MmLcb,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Mm, Mode::Ntm, Mode::MmLcb];

    pub fn label(self) -> &'static str {
        match self {
            Mode::Mm => "MM",
            Mode::Ntm => "NTM",
            Mode::MmLcb => "MM+LCB",
        }
    }

    pub fn data_mode(self) -> DataMode {
        match self {
            Mode::Ntm => DataMode::Ntm,
            _ => DataMode::Mm,
        }
    }

    pub fn uses_lcb(self) -> bool {
        self == Mode::MmLcb
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['+', '-'], "_").as_str() {
            "mm" => Ok(Mode::Mm),
            "ntm" => Ok(Mode::Ntm),
            "mm_lcb" => Ok(Mode::MmLcb),
            _ => Err(Error::Config(format!("unknown mode '{s}' (expected mm, ntm or mm_lcb)"))),
        }
    }
}

/// Label used for the classical baseline in reports.
pub const CFAR_LABEL: &str = "CA-CFAR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Frames drawn from the mixed law for the overall evaluation.
    pub overall_frames: usize,
    /// Frames per fixed-SNR sweep point.
    pub sweep_frames: usize,
    /// Pure-noise frames used to calibrate the probability threshold.
    pub calibration_frames: usize,
    /// Independent pure-noise frames used to check the realized Pfa.
    pub holdout_noise_frames: usize,
    pub weak_sweep_db: Vec<f64>,
    pub strong_sweep_db: Vec<f64>,
    /// Chebyshev matching tolerance in bins.
    pub tol: usize,
    pub cfar_baseline: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            overall_frames: 50,
            sweep_frames: 20,
            calibration_frames: 8,
            holdout_noise_frames: 8,
            weak_sweep_db: vec![9.0, 10.0, 11.0, 12.0, 13.0, 14.0],
            strong_sweep_db: vec![30.0, 40.0, 50.0, 60.0, 70.0],
            tol: 1,
            cfar_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// Preset false-alarm rate for every decider.
    pub alpha: f64,
    pub radar: RadarConfig,
    pub dhdc: DhdcParams,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub cfar: CfarConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            modes: Mode::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            alpha: 1e-4,
            radar: RadarConfig::default(),
            dhdc: DhdcParams::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            cfar: CfarConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("plan needs at least one mode and one seed".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.1) {
            return Err(Error::Config(format!("alpha {} outside (0, 0.1]", self.alpha)));
        }
        self.radar.validate()?;
        self.dhdc.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.cfar.validate()?;
        let cells = self.radar.cells() * self.eval.calibration_frames;
        if (cells as f64) < 100.0 / self.alpha {
            return Err(Error::Config(format!(
                "{} calibration frames give {cells} cells, alpha {} needs {}",
                self.eval.calibration_frames,
                self.alpha,
                (100.0 / self.alpha).ceil()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn net_for(&self, mode: Mode) -> NetConfig {
        NetConfig {
            use_lcb: mode.uses_lcb(),
            ..self.net.clone()
        }
    }

    /// Dataset parameters for `mode` under `seed`. MM and MM+LCB share them.
    pub fn dhdc_for(&self, mode: Mode, seed: u64) -> DhdcParams {
        DhdcParams {
            seed,
            mode: mode.data_mode(),
            ..self.dhdc.clone()
        }
    }
}

/// Evaluation of one detector under one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorEval {
    pub overall: Counts,
    pub weak_sweep: Vec<SweepPoint>,
    pub strong_sweep: Vec<SweepPoint>,
    /// Realized false-alarm rate on held-out pure-noise frames.
    pub noise_pfa: f64,
}

/// One (detector, seed) cell of the experiment matrix.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub detector: String,
    pub seed: u64,
    pub param_count: usize,
    pub complex_macs: u64,
    pub lcb_macs: u64,
    pub threshold: f64,
    pub threshold_degenerate: bool,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub aborted: Option<String>,
    pub train_log: Vec<EpochLog>,
    pub eval: DetectorEval,
    pub net: Option<NetConfig>,
    pub params: Option<NetworkParams>,
}

impl RunRecord {
    /// True when the noise-only Pfa lies outside `[0.25, 4] x alpha`.
    pub fn pfa_flagged(&self, alpha: f64) -> bool {
        !(0.25 * alpha..=4.0 * alpha).contains(&self.eval.noise_pfa)
    }
}

/// Every run of a plan plus what is needed to trace it back.
#[derive(Clone, Debug)]
pub struct DetectionReport {
    pub alpha: f64,
    pub plan_text: String,
    pub runs: Vec<RunRecord>,
    /// (file name, text) of every dataset manifest used.
    pub manifests: Vec<(String, String)>,
    /// Example frame for the before/after LCB figures.
    pub figure: Option<(ComplexFrame, crate::LcbParams)>,
}

impl DetectionReport {
    pub fn empty(alpha: f64) -> Self {
        Self {
            alpha,
            plan_text: String::new(),
            runs: Vec::new(),
            manifests: Vec::new(),
            figure: None,
        }
    }

    /// Detector labels in first-seen order.
    pub fn detectors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.detector) {
                out.push(r.detector.clone());
            }
        }
        out
    }

    pub fn runs_for<'a>(&'a self, detector: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.detector == detector)
    }

    pub fn find(&self, detector: &str, seed: u64) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.detector == detector && r.seed == seed)
    }
}

/// Stream ids for evaluation frames; disjoint from train/val streams.
fn eval_stream(kind: u64, index: usize) -> u64 {
    frame_stream(Split::Eval, index) | (kind << 40)
}

const KIND_OVERALL: u64 = 1;
const KIND_CALIBRATION: u64 = 2;
const KIND_HOLDOUT: u64 = 3;
const KIND_SWEEP: u64 = 16;

/// Frame whose targets are drawn from the mixed law, optionally with every
/// target's SNR forced to `gamma_db`.
pub fn eval_frame(
    cfg: &RadarConfig,
    p: &DhdcParams,
    seed: u64,
    stream: u64,
    gamma_db: Option<f64>,
    fft: &Fft2d,
) -> Result<LabeledFrame> {
    let base = SeededRng::new(seed, stream);
    let mut specs = sample_scenario(p, DataMode::Mm, &mut base.derive(0));
    if let Some(g) = gamma_db {
        specs.iter_mut().for_each(|s| s.gamma_db = g);
    }
    let mut f = build_frame(cfg, &specs, p.sigma2(cfg), p.w_db, p.noise_domain, DataMode::Mm, &mut base.derive(1), fft)?;
    quantize_f32(&mut f.rdm);
    Ok(f)
}

fn noise_frame(cfg: &RadarConfig, p: &DhdcParams, seed: u64, stream: u64, fft: &Fft2d) -> Result<LabeledFrame> {
    let base = SeededRng::new(seed, stream);
    let mut f = build_frame(cfg, &[], p.sigma2(cfg), p.w_db, p.noise_domain, DataMode::Mm, &mut base.derive(1), fft)?;
    quantize_f32(&mut f.rdm);
    Ok(f)
}

/// A trained network with its calibrated decider.
pub struct TrainedDetector {
    pub mode: Mode,
    pub net: Network,
    pub params: NetworkParams,
    pub threshold: ProbThreshold,
}

impl TrainedDetector {
    pub fn detect(&self, rdm: &ComplexFrame) -> Result<DetectionSet> {
        let map = self.net.forward(&self.params, rdm)?;
        Ok(detect_prob(&map, self.threshold.threshold))
    }
}

/// Calibrate `params` on pure-noise frames at `alpha`.
pub fn calibrate_network(net: &Network, params: &NetworkParams, noise: &[ComplexFrame], alpha: f64) -> Result<ProbThreshold> {
    let maps = noise
        .par_iter()
        .map(|f| net.forward(params, f))
        .collect::<Result<Vec<_>>>()?;
    calibrate_prob_threshold(&maps, alpha)
}

enum Decider<'a> {
    Net(&'a TrainedDetector),
    Cfar(&'a CfarConfig),
}

impl Decider<'_> {
    fn detect(&self, rdm: &ComplexFrame) -> Result<DetectionSet> {
        match self {
            Decider::Net(d) => d.detect(rdm),
            Decider::Cfar(c) => ca_cfar(rdm, c),
        }
    }
}

/// Pd and Pfa at a fixed SNR: every target in every frame has SNR `gamma_db`.
pub fn snr_sweep_eval(
    det: &TrainedDetector,
    plan: &ExperimentPlan,
    seed: u64,
    gamma_db: f64,
    frames: usize,
) -> Result<Counts> {
    let fft = Fft2d::new(plan.radar.pulses, plan.radar.range_cells)?;
    let idx = plan
        .eval
        .weak_sweep_db
        .iter()
        .chain(&plan.eval.strong_sweep_db)
        .position(|&g| g == gamma_db)
        .unwrap_or(0xFFFF);
    let mut c = Counts::default();
    let per_frame = (0..frames)
        .into_par_iter()
        .map(|i| {
            let f = eval_frame(&plan.radar, &plan.dhdc, seed, eval_stream(KIND_SWEEP + idx as u64, i), Some(gamma_db), &fft)?;
            let d = det.detect(&f.rdm)?;
            Ok((match_truth(&d, &f.truth, f.rdm.shape(), plan.eval.tol), f.truth))
        })
        .collect::<Result<Vec<_>>>()?;
    for (m, t) in &per_frame {
        c.add(t, m);
    }
    Ok(c)
}

/// Evaluate every decider on the same frames.
fn evaluate(plan: &ExperimentPlan, seed: u64, deciders: &[Decider], fft: &Fft2d) -> Result<Vec<DetectorEval>> {
    let n = deciders.len();
    let tol = plan.eval.tol;
    let run_frames = |kind: u64, count: usize, gamma: Option<f64>| -> Result<Vec<Counts>> {
        let per_frame = (0..count)
            .into_par_iter()
            .map(|i| {
                let f = eval_frame(&plan.radar, &plan.dhdc, seed, eval_stream(kind, i), gamma, fft)?;
                deciders
                    .iter()
                    .map(|d| {
                        let dets = d.detect(&f.rdm)?;
                        let mut c = Counts::default();
                        c.add(&f.truth, &match_truth(&dets, &f.truth, f.rdm.shape(), tol));
                        Ok(c)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![Counts::default(); n];
        for frame in &per_frame {
            for (acc, c) in out.iter_mut().zip(frame) {
                acc.merge(c);
            }
        }
        Ok(out)
    };

    let overall = run_frames(KIND_OVERALL, plan.eval.overall_frames, None)?;
    let sweep = |list: &[f64], offset: usize| -> Result<Vec<Vec<SweepPoint>>> {
        let mut per_det = vec![Vec::new(); n];
        for (j, &g) in list.iter().enumerate() {
            let counts = run_frames(KIND_SWEEP + (offset + j) as u64, plan.eval.sweep_frames, Some(g))?;
            for (d, c) in per_det.iter_mut().zip(counts) {
                d.push(SweepPoint { gamma_db: g, counts: c });
            }
        }
        Ok(per_det)
    };
    let weak = sweep(&plan.eval.weak_sweep_db, 0)?;
    let strong = sweep(&plan.eval.strong_sweep_db, plan.eval.weak_sweep_db.len())?;
    let holdout = run_frames_noise(plan, seed, KIND_HOLDOUT, plan.eval.holdout_noise_frames, fft)?;
    let noise_pfa = deciders
        .iter()
        .map(|d| {
            let mut alarms = 0usize;
            let mut cells = 0usize;
            for f in &holdout {
                alarms += d.detect(f)?.len();
                cells += f.len();
            }
            Ok(if cells == 0 { f64::NAN } else { alarms as f64 / cells as f64 })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((0..n)
        .map(|k| DetectorEval {
            overall: overall[k].clone(),
            weak_sweep: weak[k].clone(),
            strong_sweep: strong[k].clone(),
            noise_pfa: noise_pfa[k],
        })
        .collect())
}

fn run_frames_noise(plan: &ExperimentPlan, seed: u64, kind: u64, count: usize, fft: &Fft2d) -> Result<Vec<ComplexFrame>> {
    noise_frames(&plan.radar, &plan.dhdc, seed, kind, count, fft)
}

fn noise_frames(cfg: &RadarConfig, p: &DhdcParams, seed: u64, kind: u64, count: usize, fft: &Fft2d) -> Result<Vec<ComplexFrame>> {
    (0..count)
        .into_par_iter()
        .map(|i| Ok(noise_frame(cfg, p, seed, eval_stream(kind, i), fft)?.rdm))
        .collect()
}

/// Pure-noise frames used to calibrate thresholds under `seed`.
pub fn calibration_noise(cfg: &RadarConfig, p: &DhdcParams, seed: u64, count: usize) -> Result<Vec<ComplexFrame>> {
    let fft = Fft2d::new(cfg.pulses, cfg.range_cells)?;
    noise_frames(cfg, p, seed, KIND_CALIBRATION, count, &fft)
}

/// Two-target frame (60 dB and 6 dB) used for the before/after figures.
pub fn figure_frame(plan: &ExperimentPlan) -> Result<ComplexFrame> {
    let cfg = &plan.radar;
    let fft = Fft2d::new(cfg.pulses, cfg.range_cells)?;
    let r = cfg.range_cells * 25 / 64;
    let d = (cfg.pulses / 32).max(1) as i64;
    let specs = [
        TargetSpec::on_grid(cfg, r, 2 * d, 60.0),
        TargetSpec::on_grid(cfg, r + (cfg.range_cells / 40).max(2), 3 * d, 6.0),
    ];
    let mut rng = SeededRng::new(plan.dhdc.seed, 0xF16);
    let f = build_frame(cfg, &specs, plan.dhdc.sigma2(cfg), plan.dhdc.w_db, plan.dhdc.noise_domain, DataMode::Mm, &mut rng, &fft)?;
    Ok(f.rdm)
}

/// Progress messages from [`run_plan`].
pub trait Progress: Sync {
    fn note(&self, msg: &str);
}

impl<F: Fn(&str) + Sync> Progress for F {
    fn note(&self, msg: &str) {
        self(msg)
    }
}

/// Run only `mode` from `plan`.
pub fn run_mode(plan: &ExperimentPlan, mode: Mode, progress: &dyn Progress) -> Result<DetectionReport> {
    let p = ExperimentPlan {
        modes: vec![mode],
        ..plan.clone()
    };
    run_plan(&p, progress)
}

/// Train, calibrate and evaluate every (mode, seed) cell of `plan`.
pub fn run_plan(plan: &ExperimentPlan, progress: &dyn Progress) -> Result<DetectionReport> {
    plan.validate()?;
    let cfg = &plan.radar;
    let fft = Fft2d::new(cfg.pulses, cfg.range_cells)?;
    let mut report = DetectionReport::empty(plan.alpha);
    report.plan_text = plan.to_text()?;
    report.figure = Some((figure_frame(plan)?, plan.net.lcb));

    let mut modes = plan.modes.clone();
    modes.sort();
    modes.dedup();

    for &seed in &plan.seeds {
        let calib = run_frames_noise(plan, seed, KIND_CALIBRATION, plan.eval.calibration_frames, &fft)?;
        let mut trained = Vec::new();
        let mut meta = Vec::new();
        for data_mode in [DataMode::Mm, DataMode::Ntm] {
            let group: Vec<Mode> = modes.iter().copied().filter(|m| m.data_mode() == data_mode).collect();
            if group.is_empty() {
                continue;
            }
            let dp = plan.dhdc_for(group[0], seed);
            progress.note(&format!("seed {seed}: generating {:?} dataset", data_mode));
            let ds = generate_dataset(cfg, &dp)?;
            report.manifests.push((
                format!("dataset_{}_seed{seed}.toml", format!("{data_mode:?}").to_lowercase()),
                ds.manifest.to_text()?,
            ));
            let train_set: Vec<LabeledFrame> = ds.split(Split::Train).cloned().collect();
            let val_set: Vec<LabeledFrame> = ds.split(Split::Val).cloned().collect();
            drop(ds);
            for mode in group {
                let ncfg = plan.net_for(mode);
                let net = Network::new(&ncfg)?;
                progress.note(&format!("seed {seed}: training {mode} ({} parameters)", net.param_count()));
                let hp = TrainConfig {
                    seed,
                    ..plan.train.clone()
                };
                let out = train(&net, &train_set, &val_set, &hp)?;
                if let Some(reason) = &out.aborted {
                    progress.note(&format!("seed {seed}: {mode} training aborted: {reason}"));
                }
                let threshold = calibrate_network(&net, &out.params, &calib, plan.alpha)?;
                meta.push((out.best_epoch, out.best_val_loss, out.aborted.clone(), out.log.clone()));
                trained.push(TrainedDetector {
                    mode,
                    net,
                    params: out.params,
                    threshold,
                });
            }
        }

        progress.note(&format!("seed {seed}: evaluating"));
        let mut deciders: Vec<Decider> = trained.iter().map(Decider::Net).collect();
        let cfar = CfarConfig {
            alpha: plan.alpha,
            ..plan.cfar.clone()
        };
        if plan.eval.cfar_baseline {
            deciders.push(Decider::Cfar(&cfar));
        }
        let evals = evaluate(plan, seed, &deciders, &fft)?;
        let (rows, cols) = cfg.shape();
        for (k, ev) in evals.into_iter().enumerate() {
            let rec = match trained.get(k) {
                Some(t) => {
                    let (complex_macs, lcb_macs) = t.net.forward_macs(rows, cols);
                    let (best_epoch, best_val_loss, aborted, log) = meta[k].clone();
                    RunRecord {
                        detector: t.mode.label().to_string(),
                        seed,
                        param_count: t.net.param_count(),
                        complex_macs,
                        lcb_macs,
                        threshold: t.threshold.threshold,
                        threshold_degenerate: t.threshold.degenerate,
                        best_epoch,
                        best_val_loss,
                        aborted,
                        train_log: log,
                        eval: ev,
                        net: Some(t.net.config().clone()),
                        params: Some(t.params.clone()),
                    }
                }
                None => RunRecord {
                    detector: CFAR_LABEL.to_string(),
                    seed,
                    param_count: 0,
                    complex_macs: 0,
                    lcb_macs: 0,
                    threshold: crate::detector::threshold_factor(cfar.interior_training_cells(), cfar.alpha),
                    threshold_degenerate: false,
                    best_epoch: 0,
                    best_val_loss: f64::NAN,
                    aborted: None,
                    train_log: Vec::new(),
                    eval: ev,
                    net: None,
                    params: None,
                },
            };
            report.runs.push(rec);
        }
    }
    Ok(report)
}

/// Dataset manifest for one (mode, seed) pair, without generating frames.
pub fn plan_manifest(plan: &ExperimentPlan, mode: Mode, seed: u64) -> DatasetManifest {
    DatasetManifest::plan(&plan.radar, &plan.dhdc_for(mode, seed))
}
