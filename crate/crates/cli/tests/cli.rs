//! End-to-end checks of the `ledkkl` binary: pipeline wiring, exit codes,
//! artifact layout, and byte-level reproducibility at toy scale.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ledkkl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Toy-scale config exercising every stage in seconds.
fn write_tiny_config(dir: &Path) -> String {
    let cfg = dir.join("run.cfg");
    let text = format!(
        "# toy-scale pipeline settings\n\
         data.size = 1500\n\
         train.epochs_dyn = 4\n\
         train.epochs_recon = 4\n\
         train.batch_size = 128\n\
         train.hidden_dim = 24\n\
         eval.steps = 40\n\
         eval.lipschitz_samples = 15\n\
         sweep.steps = 30\n\
         oracle.samples = 4\n\
         paths.dataset = {d}/dataset.csv\n\
         paths.checkpoints = {d}/ckpt\n\
         paths.out = {d}/out\n\
         run.seed = 3\n",
        d = dir.display()
    );
    fs::write(&cfg, text).unwrap();
    cfg.display().to_string()
}

#[test]
fn help_lists_the_config_keys_each_command_reads() {
    let out = run_ok(&["train", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("train.epochs_dyn"), "{text}");
    assert!(text.contains("run.seed"), "{text}");
    assert!(text.contains("latent.a_diag"), "{text}");

    let out = run_ok(&["sweep", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sweep.distances"), "{text}");
    assert!(!text.contains("train.epochs_dyn"), "{text}");
}

#[test]
fn unknown_config_key_exits_with_code_2() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "channel.bogus = 1\n").unwrap();
    let out = run(&["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel.bogus"), "{err}");
}

#[test]
fn bad_set_flag_exits_with_code_2() {
    let out = run(&["generate", "--set", "train.epochs_dyn=lots"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["generate", "--set", "no_equals_sign"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degree_suffix_is_rejected_in_files_but_accepted_as_flag() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("deg.cfg");
    fs::write(&cfg, "channel.receiver_offset = 6deg\n").unwrap();
    let out = run(&["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("radians"), "{err}");

    // Same assignment as a flag parses; the command then runs.
    let ds = dir.path().join("d.csv");
    run_ok(&[
        "generate",
        "--set",
        "channel.receiver_offset=6deg",
        "--set",
        "data.size=10",
        "--set",
        &format!("paths.dataset={}", ds.display()),
    ]);
    assert!(ds.exists());
}

#[test]
fn train_without_dataset_exits_with_code_3() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "train",
        "--set",
        &format!("paths.dataset={}/nowhere.csv", dir.path().display()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_without_checkpoints_exits_with_code_3() {
    let dir = tempdir().unwrap();
    let out = run(&[
        "evaluate",
        "--set",
        &format!("paths.checkpoints={}/ckpt", dir.path().display()),
        "--out",
        &format!("{}/out", dir.path().display()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pipeline_produces_every_artifact_and_reruns_bitwise_identically() {
    let dir = tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());

    run_ok(&["generate", "--config", &cfg]);
    let dataset = dir.path().join("dataset.csv");
    assert!(dataset.exists());

    run_ok(&["train", "--config", &cfg]);
    assert!(dir.path().join("ckpt/encoder.net").exists());
    assert!(dir.path().join("ckpt/decoder.net").exists());
    let log = fs::read_to_string(dir.path().join("out/training_log.csv")).unwrap();
    // Header plus one row per epoch in each phase.
    assert_eq!(log.lines().count(), 1 + 4 + 4, "{log}");

    let out = run_ok(&["evaluate", "--config", &cfg]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("contraction report"), "{text}");
    for label in ["open_loop", "forced_cos", "forced_mix", "closed_loop"] {
        assert!(dir.path().join(format!("out/trace_{label}.csv")).exists(), "{label}");
    }
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4, "{summary}");
    assert!(dir.path().join("out/contraction_report.txt").exists());

    run_ok(&["sweep", "--config", &cfg]);
    let sens = fs::read_to_string(dir.path().join("out/sensitivity.csv")).unwrap();
    // Three controllers at three distances.
    assert_eq!(sens.lines().count(), 1 + 9, "{sens}");

    run_ok(&["oracle-check", "--config", &cfg]);
    let report = fs::read_to_string(dir.path().join("out/oracle_report.txt")).unwrap();
    assert!(report.contains("PASS"), "{report}");
    assert!(report.contains("trained encoder vs series"), "{report}");

    // Re-running the read-only stages into a fresh directory reproduces
    // every byte; the pipeline has no hidden state.
    let out2 = dir.path().join("out2");
    run_ok(&["evaluate", "--config", &cfg, "--out", out2.to_str().unwrap()]);
    run_ok(&["sweep", "--config", &cfg, "--out", out2.to_str().unwrap()]);
    for name in ["trace_open_loop.csv", "trace_closed_loop.csv", "summary.csv", "sensitivity.csv"] {
        let a = fs::read(dir.path().join("out").join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn the_seed_flag_overrides_the_config_seed() {
    let dir = tempdir().unwrap();
    let base = dir.path().join("a.csv");
    let flagged = dir.path().join("b.csv");
    run_ok(&[
        "generate",
        "--set",
        "data.size=20",
        "--set",
        "run.seed=11",
        "--set",
        &format!("paths.dataset={}", base.display()),
    ]);
    run_ok(&[
        "generate",
        "--set",
        "data.size=20",
        "--set",
        "run.seed=5",
        "--seed",
        "11",
        "--set",
        &format!("paths.dataset={}", flagged.display()),
    ]);
    assert_eq!(fs::read(&base).unwrap(), fs::read(&flagged).unwrap());
}
