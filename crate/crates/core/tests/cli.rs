//! End-to-end runs of the binary on a deliberately tiny configuration.

use std::path::{Path, PathBuf};
use std::process::Command;

const TINY: &str = r#"
case = "single"
seed = 1
plots = true
control_duration = 6.0

[data]
train_seconds = 8.0
test_seconds = 4.0

[koopman]
window = 20
latent_dim = 8
hidden_encoder = 8
hidden_decoder = 8
epochs = 2

[gru]
horizon = 20
units = 4
init_hidden = 4
output_hidden = 4
batch_size = 5
epochs = 1

[mpc]
start_time = 3.0

[mpc.excitation]
duration = 2.0

[evaluation]
psd_segment = 64
suppression_window = [4.0, 6.0]

[ablation]
seeds = 2
variants = ["full", "no_lin"]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_koopman-mpc"));
    c.env("RUST_LOG", "warn");
    c
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

fn run(cfg: &Path, out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = bin().arg("--config").arg(cfg).arg("--out").arg(out).args(args).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into(), String::from_utf8_lossy(&o.stderr).into())
}

fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(cfg: &Path, out: &Path) {
    for stage in ["simulate", "train", "predict", "control", "evaluate", "ablate"] {
        let (code, stdout, stderr) = run(cfg, out, &[stage]);
        assert_eq!(code, 0, "{stage} failed: {stdout}\n{stderr}");
        assert!(stdout.contains("written"), "{stage}: {stdout}");
    }
}

#[test]
fn pipeline_is_deterministic_and_idempotent() {
    let (dir, cfg) = setup();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(&cfg, &a);
    pipeline(&cfg, &b);
    let first = files(&a);
    assert_eq!(first, files(&b), "reruns into fresh roots must be byte-identical");

    let names: Vec<String> = first.iter().map(|(p, _)| p.to_string_lossy().into_owned()).collect();
    for needed in ["trace.csv", "koopman.json", "gru.json", "control_log.csv", "report_koopman.json", "table.txt", "runs.csv"] {
        assert!(names.iter().any(|n| n.ends_with(needed)), "missing {needed}");
    }
    for svg in ["trace.svg", "prediction.svg", "psd.svg", "control.svg"] {
        assert!(names.iter().any(|n| n.ends_with(svg)), "missing {svg}");
    }
    assert!(names.iter().filter(|n| n.ends_with("manifest.json")).count() >= 7);

    for stage in ["simulate", "train", "predict", "control", "evaluate", "ablate", "plot"] {
        let (code, stdout, _) = run(&cfg, &a, &[stage]);
        assert_eq!(code, 0);
        assert!(stdout.contains("reused"), "{stage} recomputed: {stdout}");
    }
    assert_eq!(first, files(&a), "idempotent reruns must not touch any file");

    let log = first.iter().find(|(p, _)| p.ends_with("control_log.csv")).unwrap();
    let header = String::from_utf8_lossy(&log.1).lines().next().unwrap().to_owned();
    assert_eq!(header, "t,u,du,eeg_ch0,qp_iters,qp_time_s");
}

#[test]
fn seed_changes_training_but_not_simulation() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    assert_eq!(run(&cfg, &out, &["simulate"]).0, 0);
    assert_eq!(run(&cfg, &out, &["train"]).0, 0);
    let (code, stdout, _) = run(&cfg, &out, &["--seed", "2", "simulate"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("reused"));
    let (code, stdout, _) = run(&cfg, &out, &["--seed", "2", "train"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("written"));
    assert_eq!(std::fs::read_dir(out.join("train")).unwrap().count(), 2);
}

#[test]
fn exit_codes() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    // Missing upstream artifact is a runtime failure.
    let (code, _, stderr) = run(&cfg, &out, &["train"]);
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("missing upstream artifact"));
    // Validation failures.
    assert_eq!(run(&cfg, &out, &["--case", "triple", "simulate"]).0, 2);
    assert_eq!(run(&cfg, &out, &["--set", "koopman.epochs=-1", "simulate"]).0, 2);
    assert_eq!(run(&cfg, &out, &["--set", "mpc.u_min=5.0", "simulate"]).0, 2);
    assert_eq!(run(&cfg, &out, &["--case", "double", "simulate", "--A", "7.0"]).0, 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "unknown_key = 1").unwrap();
    assert_eq!(run(&bad, &out, &["simulate"]).0, 2);
    // Usage errors.
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn tampered_artifact_is_a_hash_mismatch() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    let (code, stdout, _) = run(&cfg, &out, &["simulate"]);
    assert_eq!(code, 0);
    let stage_dir = stdout.split_whitespace().nth(1).unwrap().to_owned();
    std::fs::write(Path::new(&stage_dir).join("trace.csv"), "t,ch0,u\n0,0,0\n").unwrap();
    let (code, _, stderr) = run(&cfg, &out, &["train"]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("hash mismatch"));
}

#[test]
fn simulate_gain_flag() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    let mut ptp = Vec::new();
    for a in ["7.0", "7.8"] {
        let (code, stdout, _) = run(&cfg, &out, &["simulate", "--A", a]);
        assert_eq!(code, 0);
        let dir = stdout.split_whitespace().nth(1).unwrap().to_owned();
        let s: serde_json::Value = serde_json::from_slice(&std::fs::read(Path::new(&dir).join("summary.json")).unwrap()).unwrap();
        ptp.push(s["peak_to_peak_mv"][0].as_f64().unwrap());
    }
    assert!(ptp[1] > 2.0 * ptp[0], "{ptp:?}");
}
