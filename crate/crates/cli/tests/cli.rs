use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdrlab_core::dhdc::{quantize_f32, read_dataset, read_frame_file};
use hdrlab_core::lcb::lcb_forward;
use hdrlab_core::LcbParams;

const SMALL: &str = r#"
[radar]
pulses = 64
range_cells = 128

[dhdc]
frames = 6
val_frames = 2
n_max = 3

[net]
patch = [32, 32]

[train]
epochs = 1

[plan]
seeds = [1]
alpha = 1e-2

[plan.eval]
overall_frames = 2
sweep_frames = 1
calibration_frames = 2
holdout_noise_frames = 2
weak_sweep_db = [12.0]
strong_sweep_db = [40.0]
"#;

fn hdrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdrlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hdrlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_is_deterministic() {
    let (dir, cfg) = setup();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["gen", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["gen", "--config", s(&cfg), "--out", s(&b)]);
    let fa = files(&a);
    assert_eq!(fa.len(), 1 + 1 + 8 + 8);
    assert_eq!(fa, files(&b));
}

#[test]
fn gen_ntm_is_weak_only() {
    let (dir, cfg) = setup();
    let out = dir.path().join("ntm");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out), "--mode", "ntm", "--frames", "10"]);
    let ds = read_dataset(&out).unwrap();
    let gammas: Vec<f64> = ds.frames.iter().flat_map(|f| f.gammas()).collect();
    assert!(!gammas.is_empty());
    assert!(gammas.iter().all(|&g| g < 14.0));
}

#[test]
fn gen_rejects_zero_frames() {
    let (dir, cfg) = setup();
    let out = hdrlab(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("z")), "--frames", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_1() {
    let (dir, _) = setup();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[radar]\npulsez = 64\n").unwrap();
    let out = hdrlab(&["gen", "--config", s(&bad), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(hdrlab(&["gen"]).status.code(), Some(1));
    assert_eq!(hdrlab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn lcb_matches_library_and_keeps_metadata() {
    let (dir, cfg) = setup();
    let ds = dir.path().join("ds");
    ok(&["gen", "--config", s(&cfg), "--out", s(&ds)]);
    let input = ds.join("frames").join("000000.rdf");
    let output = dir.path().join("out.rdf");
    ok(&["lcb", "--input", s(&input), "--output", s(&output), "--w", "3.0"]);
    let a = read_frame_file(&input, 0).unwrap();
    let b = read_frame_file(&output, 0).unwrap();
    assert_eq!(a.mask, b.mask);
    assert_eq!(a.mode, b.mode);
    assert_eq!(a.index, b.index);
    assert_eq!(a.frame.tag(), b.frame.tag());
    let mut expect = lcb_forward(&a.frame, &LcbParams::with_w(3.0).unwrap());
    quantize_f32(&mut expect);
    assert_eq!(expect, b.frame);

    ok(&["lcb", "--input", s(&input), "--output", s(&output), "--w", "1e9"]);
    let c = read_frame_file(&output, 0).unwrap();
    for (x, y) in a.frame.data().iter().zip(c.frame.data()) {
        assert!((x - y).norm() <= 1e-6 * x.norm().max(1e-3));
    }
}

#[test]
fn corrupted_frame_exits_2() {
    let (dir, cfg) = setup();
    let ds = dir.path().join("ds");
    ok(&["gen", "--config", s(&cfg), "--out", s(&ds)]);
    let input = ds.join("frames").join("000001.rdf");
    let mut bytes = fs::read(&input).unwrap();
    bytes[100] ^= 0x10;
    fs::write(&input, bytes).unwrap();
    let out = hdrlab(&["lcb", "--input", s(&input), "--output", s(&dir.path().join("o.rdf"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = hdrlab(&["cfar", "--dataset", s(&ds), "--out", s(&dir.path().join("d.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cfar_train_eval_pipeline() {
    let (dir, cfg) = setup();
    let ds = dir.path().join("ds");
    ok(&["gen", "--config", s(&cfg), "--out", s(&ds)]);
    let dets = dir.path().join("cfar.csv");
    let text = ok(&["cfar", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&dets)]);
    assert!(text.contains("Pd"));
    assert!(fs::read_to_string(&dets).unwrap().starts_with("frame_id,row,col,score,is_hit\n"));

    let single = dir.path().join("single.csv");
    ok(&["cfar", "--input", s(&ds.join("frames").join("000000.rdf")), "--out", s(&single)]);
    assert!(single.exists());

    let ckpt = dir.path().join("net.ckpt");
    ok(&["train", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&ckpt), "--lcb", "--max-steps", "2"]);
    assert!(ckpt.exists());
    assert!(dir.path().join("net.log.csv").exists());
    let eval = ok(&[
        "eval",
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&ckpt),
        "--dataset",
        s(&ds),
        "--out",
        s(&dir.path().join("net.csv")),
    ]);
    assert!(eval.contains("threshold"));
}

#[test]
fn run_writes_tables_and_is_reproducible() {
    let (dir, cfg) = setup();
    let a = dir.path().join("ra");
    let b = dir.path().join("rb");
    ok(&["run", "--config", s(&cfg), "--out", s(&a), "--quiet"]);
    ok(&["run", "--config", s(&cfg), "--out", s(&b), "--quiet"]);
    for t in ["table1_overall", "table2_weak_snr", "table3_strong_snr", "runs"] {
        let p = format!("tables/{t}.csv");
        assert_eq!(fs::read(a.join(&p)).unwrap(), fs::read(b.join(&p)).unwrap(), "{t}");
    }
    for f in ["summary.txt", "figures/rdm_before_lcb.png", "figures/rdm_after_lcb.png", "manifests/plan.toml", "manifests/config.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let t1 = fs::read_to_string(a.join("tables/table1_overall.csv")).unwrap();
    for d in ["MM,", "NTM,", "MM+LCB,", "CA-CFAR,"] {
        assert!(t1.contains(d), "{d}");
    }
    let printed = ok(&["report", "--dir", s(&a)]);
    assert!(printed.contains("table2_weak_snr.csv"));

    let n = dir.path().join("rn");
    ok(&["run", "--config", s(&cfg), "--out", s(&n), "--mode", "ntm", "--quiet"]);
    let t1 = fs::read_to_string(n.join("tables/table1_overall.csv")).unwrap();
    assert!(t1.contains("NTM,"));
    assert!(!t1.contains("MM,") && !t1.contains("MM+LCB"));
}
