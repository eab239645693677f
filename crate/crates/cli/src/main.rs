//! `hdrlab`: generate datasets, apply the LCB, run CFAR, train and
//! evaluate the toy network, and run the full mode comparison.
//!
//! Values are resolved as: command-line flag, then `--config` file, then
//! built-in default.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdrlab_core::config::CliConfig;
use hdrlab_core::cvnet::{read_checkpoint, train, write_checkpoint, Network, TrainConfig};
use hdrlab_core::detector::{
    ca_cfar, cell_distance, detect_prob, match_truth, write_detections_csv, CfarConfig, DetectionSet, MatchResult,
};
use hdrlab_core::dhdc::{
    generate_dataset, read_dataset, read_frame_file, write_dataset, write_frame_file, DataMode, RdfFrame, Split,
};
use hdrlab_core::harness::{
    calibrate_network, calibration_noise, read_csv_table, render_heatmap_png, render_report, run_plan, Counts, Mode,
};
use hdrlab_core::lcb::lcb_forward;
use hdrlab_core::{Error, LcbParams};

#[derive(Parser)]
#[command(name = "hdrlab", version, about = "HDR radar detection laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<CliConfig, Error> {
        match &self.config {
            Some(p) => CliConfig::load(p),
            None => Ok(CliConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labelled dataset.
    Gen(GenArgs),
    /// Apply the logarithmic connect block to one frame file.
    Lcb(LcbArgs),
    /// Run CA-CFAR on a frame file or a dataset.
    Cfar(CfarArgs),
    /// Train the network on a dataset.
    Train(TrainArgs),
    /// Calibrate and evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run the MM / NTM / MM+LCB comparison and write a report.
    Run(RunArgs),
    /// Print the tables of a report directory, or render a frame heatmap.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    val_frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// mm or ntm.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct LcbArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Junction magnitude (linear amplitude).
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct CfarArgs {
    #[command(flatten)]
    common: Common,
    /// Single RDF1 frame.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    input: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Detections CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1)]
    tol: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    out: PathBuf,
    /// Put the LCB in front of the network.
    #[arg(long)]
    lcb: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    base_channels: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Pure-noise frames for threshold calibration.
    #[arg(long)]
    calibration_frames: Option<usize>,
    /// Detections CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    tol: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
    /// Restrict to these modes (mm, ntm, mm_lcb); repeatable.
    #[arg(long)]
    mode: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    val_frames: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Report directory written by `run`.
    #[arg(long, required_unless_present = "frame")]
    dir: Option<PathBuf>,
    /// RDF1 frame to render as a magnitude heatmap.
    #[arg(long, requires = "png")]
    frame: Option<PathBuf>,
    #[arg(long)]
    png: Option<PathBuf>,
    /// Apply the LCB with this junction before rendering.
    #[arg(long)]
    lcb_w: Option<f64>,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_integrity() {
            2
        } else {
            match e {
                Error::Numeric(_) | Error::Calibration(_) => 3,
                _ => 1,
            }
        };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        msg: msg.into(),
    }
}

type Res = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Lcb(a) => cmd_lcb(a),
        Cmd::Cfar(a) => cmd_cfar(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Res {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_data_mode(s: &str) -> Result<DataMode, Failure> {
    match s.to_ascii_lowercase().as_str() {
        "mm" => Ok(DataMode::Mm),
        "ntm" => Ok(DataMode::Ntm),
        _ => Err(usage(format!("unknown dataset mode '{s}' (expected mm or ntm)"))),
    }
}

fn cmd_gen(a: GenArgs) -> Res {
    let mut cfg = a.common.load()?;
    if let Some(n) = a.frames {
        if n == 0 {
            return Err(usage("--frames must be at least 1"));
        }
        cfg.dhdc.frames = n;
    }
    if let Some(n) = a.val_frames {
        cfg.dhdc.val_frames = n;
    }
    if let Some(s) = a.seed {
        cfg.dhdc.seed = s;
    }
    if let Some(m) = &a.mode {
        cfg.dhdc.mode = parse_data_mode(m)?;
    }
    cfg.radar.validate()?;
    cfg.dhdc.validate()?;
    let ds = generate_dataset(&cfg.radar, &cfg.dhdc)?;
    write_dataset(&ds, &a.out)?;
    write_text(&a.out.join("config.toml"), &cfg.to_text()?)?;
    let strong: usize = ds.frames.iter().flat_map(|f| &f.truth).filter(|t| t.is_strong).count();
    let total: usize = ds.frames.iter().map(|f| f.truth.len()).sum();
    println!(
        "wrote {} frames ({} train, {} val) with {total} targets ({strong} strong) to {}",
        ds.frames.len(),
        ds.split(Split::Train).count(),
        ds.split(Split::Val).count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_lcb(a: LcbArgs) -> Res {
    let cfg = a.common.load()?;
    let base = cfg.lcb_params()?;
    let p = LcbParams::new(a.w.unwrap_or(base.w), a.epsilon.unwrap_or(base.epsilon))?;
    let input = read_frame_file(&a.input, 0)?;
    let out = RdfFrame {
        frame: lcb_forward(&input.frame, &p),
        ..input
    };
    write_frame_file(&a.output, &out)?;
    println!("lcb w={} epsilon={:e}: {} -> {}", p.w, p.epsilon, a.input.display(), a.output.display());
    Ok(())
}

/// Hits for a frame without target records: within `tol` of a mask cell.
fn mask_hits(dets: &DetectionSet, f: &RdfFrame, tol: usize) -> MatchResult {
    let rows = f.frame.rows();
    let cells: Vec<(usize, usize)> = f
        .mask
        .as_ref()
        .map(|m| {
            m.bits()
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| (i / m.shape().1, i % m.shape().1))
                .collect()
        })
        .unwrap_or_default();
    let detection_hits = dets
        .cells
        .iter()
        .map(|d| cells.iter().any(|&c| cell_distance((d.row, d.col), c, rows) <= tol))
        .collect();
    MatchResult {
        hits: Vec::new(),
        detection_hits,
        false_alarms: 0,
        non_truth_cells: 0,
    }
}

fn cmd_cfar(a: CfarArgs) -> Res {
    let cfg = a.common.load()?;
    let cfar = CfarConfig {
        alpha: a.alpha.unwrap_or(cfg.cfar.alpha),
        ..cfg.cfar.clone()
    };
    cfar.validate()?;
    if let Some(input) = &a.input {
        let f = read_frame_file(input, 0)?;
        let dets = ca_cfar(&f.frame, &cfar)?;
        let m = mask_hits(&dets, &f, a.tol);
        write_detections_csv(&a.out, &[(f.index as usize, &dets, &m)])?;
        println!("{} detections in {}", dets.len(), input.display());
        return Ok(());
    }
    let dir = a.dataset.as_ref().expect("clap enforces --input or --dataset");
    let ds = read_dataset(dir)?;
    let results = ds
        .frames
        .iter()
        .map(|f| {
            let d = ca_cfar(&f.rdm, &cfar)?;
            let m = match_truth(&d, &f.truth, f.rdm.shape(), a.tol);
            Ok((d, m))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut counts = Counts::default();
    for (f, (_, m)) in ds.frames.iter().zip(&results) {
        counts.add(&f.truth, m);
    }
    let rows: Vec<_> = ds
        .manifest
        .frames
        .iter()
        .zip(&results)
        .map(|(e, (d, m))| (e.index, d, m))
        .collect();
    write_detections_csv(&a.out, &rows)?;
    print_counts("CA-CFAR", &counts);
    Ok(())
}

fn print_counts(label: &str, c: &Counts) {
    println!(
        "{label}: frames {} targets {} Pd {:.2}% (non-strong {:.2}%, strong {:.2}%) Pfa {:.3e}",
        c.frames,
        c.targets,
        100.0 * c.pd(),
        100.0 * c.pd_weak(),
        100.0 * c.pd_strong(),
        c.pfa()
    );
}

fn cmd_train(a: TrainArgs) -> Res {
    let mut cfg = a.common.load()?;
    if let Some(c) = a.base_channels {
        cfg.net.base_channels = c;
    }
    let hp = TrainConfig {
        epochs: a.epochs.unwrap_or(cfg.train.epochs),
        seed: a.seed.unwrap_or(cfg.train.seed),
        lr: a.lr.unwrap_or(cfg.train.lr),
        batch: a.batch.unwrap_or(cfg.train.batch),
        max_steps: a.max_steps.or(cfg.train.max_steps),
        ..cfg.train.clone()
    };
    let ncfg = cfg.net_config(a.lcb)?;
    let net = Network::new(&ncfg)?;
    let ds = read_dataset(&a.dataset)?;
    let tr: Vec<_> = ds.split(Split::Train).cloned().collect();
    let va: Vec<_> = ds.split(Split::Val).cloned().collect();
    println!("training {} parameters on {} frames ({} validation)", net.param_count(), tr.len(), va.len());
    let out = train(&net, &tr, &va, &hp)?;
    write_checkpoint(&a.out, &ncfg, &out.params)?;
    let mut log = String::from("epoch,steps,train_loss,val_loss\n");
    for e in &out.log {
        log.push_str(&format!("{},{},{},{}\n", e.epoch, e.steps, e.train_loss, e.val_loss));
    }
    write_text(&a.out.with_extension("log.csv"), &log)?;
    println!("best epoch {} validation loss {:.6}", out.best_epoch, out.best_val_loss);
    if let Some(reason) = out.aborted {
        return Err(Failure {
            code: 3,
            msg: format!("training aborted ({reason}); last finite checkpoint written"),
        });
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Res {
    let cfg = a.common.load()?;
    let (ncfg, params) = read_checkpoint(&a.checkpoint)?;
    let net = Network::new(&ncfg)?;
    let ds = read_dataset(&a.dataset)?;
    let alpha = a.alpha.unwrap_or(cfg.plan.alpha);
    let ncal = a.calibration_frames.unwrap_or(cfg.plan.eval.calibration_frames);
    let noise = calibration_noise(&ds.manifest.radar, &ds.manifest.dhdc, ds.manifest.dhdc.seed, ncal)?;
    let thr = calibrate_network(&net, &params, &noise, alpha)?;
    let mut counts = Counts::default();
    let mut results = Vec::new();
    for f in &ds.frames {
        let map = net.forward(&params, &f.rdm)?;
        let d = detect_prob(&map, thr.threshold);
        let m = match_truth(&d, &f.truth, f.rdm.shape(), a.tol);
        counts.add(&f.truth, &m);
        results.push((d, m));
    }
    println!(
        "threshold {} (alpha {alpha:e}, {} calibration cells{})",
        thr.threshold,
        thr.cells,
        if thr.degenerate { ", degenerate" } else { "" }
    );
    print_counts(&format!("network ({})", if ncfg.use_lcb { "LCB" } else { "no LCB" }), &counts);
    if let Some(out) = &a.out {
        let rows: Vec<_> = ds
            .manifest
            .frames
            .iter()
            .zip(&results)
            .map(|(e, (d, m))| (e.index, d, m))
            .collect();
        write_detections_csv(out, &rows)?;
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Res {
    let mut cfg = a.common.load()?;
    if !a.mode.is_empty() {
        cfg.plan.modes = a.mode.iter().map(|m| m.parse::<Mode>()).collect::<Result<_, _>>()?;
    }
    if let Some(s) = a.seeds {
        cfg.plan.seeds = s;
    }
    if let Some(n) = a.frames {
        if n == 0 {
            return Err(usage("--frames must be at least 1"));
        }
        cfg.dhdc.frames = n;
    }
    if let Some(n) = a.val_frames {
        cfg.dhdc.val_frames = n;
    }
    if let Some(n) = a.epochs {
        cfg.train.epochs = n;
    }
    let plan = cfg.plan()?;
    let quiet = a.quiet;
    let report = run_plan(&plan, &|m: &str| {
        if !quiet {
            eprintln!("{m}");
        }
    })?;
    render_report(&report, &a.out)?;
    write_text(&a.out.join("manifests").join("config.toml"), &cfg.to_text()?)?;
    print!("{}", fs::read_to_string(a.out.join("summary.txt")).unwrap_or_default());
    let aborted: Vec<_> = report.runs.iter().filter(|r| r.aborted.is_some()).collect();
    if !aborted.is_empty() {
        return Err(Failure {
            code: 3,
            msg: format!("{} training run(s) aborted on non-finite values; report written", aborted.len()),
        });
    }
    Ok(())
}

fn print_table(path: &Path) -> Res {
    let t = read_csv_table(path)?;
    println!("== {}", path.file_name().unwrap_or_default().to_string_lossy());
    let mut widths: Vec<usize> = t.header.iter().map(String::len).collect();
    for r in &t.rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", line(&t.header));
    for r in &t.rows {
        println!("{}", line(r));
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Res {
    if let (Some(frame), Some(png)) = (&a.frame, &a.png) {
        let f = read_frame_file(frame, 0)?;
        let img = match a.lcb_w {
            Some(w) => lcb_forward(&f.frame, &LcbParams::with_w(w)?),
            None => f.frame,
        };
        render_heatmap_png(&img, png)?;
        println!("wrote {}", png.display());
    }
    if let Some(dir) = &a.dir {
        for t in ["table1_overall", "table2_weak_snr", "table3_strong_snr"] {
            print_table(&dir.join("tables").join(format!("{t}.csv")))?;
        }
    }
    Ok(())
}
