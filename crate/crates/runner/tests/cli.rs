use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dnls_runner::Manifest;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls-lab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn solve_meets_the_residual_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["solve", "--xi", "1,0", "--h", "0.1", "--L", "80", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = Manifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.status, "ok");
    assert_eq!(m.checks.len(), 1);
    assert!(m.checks[0].value < 1e-11);
    assert!(dir.path().join("xi=1,0_h=0.1/solution.csv").exists());
    for f in &m.outputs {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    // ξ₁ below (ξ₂/2)²
    assert_eq!(code(&lab(&["solve", "--xi", "0.1,2", "--out", &out])), 2);
    assert_eq!(code(&lab(&["stability", "--flow", "burgers", "--t-final", "1", "--out", &out])), 2);
    assert_eq!(code(&lab(&["solve", "--xi", "1"])), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "experiment = \"solve\"\nunknown_key = 3\n").unwrap();
    assert_eq!(code(&lab(&["solve", "--config", bad.to_str().unwrap(), "--out", &out])), 2);
    let other = dir.path().join("other.toml");
    fs::write(&other, "experiment = \"stability\"\n").unwrap();
    assert_eq!(code(&lab(&["solve", "--config", other.to_str().unwrap(), "--out", &out])), 2);
    // output directory below a regular file
    let file = dir.path().join("plain");
    fs::write(&file, "").unwrap();
    assert_eq!(code(&lab(&["stencil-info", "--out", file.join("x").to_str().unwrap()])), 1);
}

#[test]
fn blow_up_exits_with_numerical_code_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "stability", "--xi", "50,0", "--h", "0.5", "--L", "20", "--initial", "psi", "--perturbation", "0", "--scheme", "rk4", "--dt", "0.1",
        "--t-final", "5", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite"));
    let m = Manifest::read(&dir.path().join("manifest.json")).unwrap();
    assert!(m.status.starts_with("error"));
    let csv = fs::read_to_string(dir.path().join("xi=50,0_h=0.5/trajectory.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
}

#[test]
fn failed_gate_exits_with_gate_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gate.toml");
    fs::write(&cfg, "[gates]\ndelta_max = 1e-12\n").unwrap();
    let base = ["stability", "--xi", "1,0", "--h", "0.4", "--t-final", "1", "--config", cfg.to_str().unwrap()];
    let mut gated = base.to_vec();
    let out = out_arg(&dir.path().join("g"));
    gated.extend(["--gate", "--out", &out]);
    assert_eq!(code(&lab(&gated)), 4);
    assert_eq!(Manifest::read(&dir.path().join("g/manifest.json")).unwrap().status, "gate_failed");
    // without the flag the failed check is only reported
    let mut plain = base.to_vec();
    let out = out_arg(&dir.path().join("p"));
    plain.extend(["--out", &out]);
    let o = lab(&plain);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn single_step_consistency_has_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["consistency", "--h", "0.2", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    for series in fit.as_array().unwrap() {
        assert!(series["slope"].is_null());
    }
}

fn stability_args<'a>(out: &'a str, threads: &'a str) -> Vec<&'a str> {
    vec![
        "stability", "--xi", "1,0", "--xi", "1,0.4", "--h", "0.4", "--h", "0.2", "--t-final", "5", "--perturbation", "1e-3", "--seed", "11",
        "--threads", threads, "--out", out,
    ]
}

fn same_files(a: &Path, b: &Path, files: &[String]) {
    for f in files.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn outputs_are_deterministic_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&lab(&stability_args(&out_arg(&a), "1"))), 0);
    assert_eq!(code(&lab(&stability_args(&out_arg(&b), "4"))), 0);
    let m = Manifest::read(&a.join("manifest.json")).unwrap();
    assert!(m.outputs.iter().filter(|f| f.ends_with(".csv")).count() >= 12);
    same_files(&a, &b, &m.outputs);
}

#[test]
fn replay_reproduces_the_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "xi = [[1.2, 0.6]]\nh = [0.25]\nseed = 5\n\n[evolution]\nt_final = 3.0\nscheme = \"rk4\"\n").unwrap();
    assert_eq!(code(&lab(&["stability", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&a)])), 0);
    let manifest = a.join("manifest.json");
    let o = lab(&["replay", manifest.to_str().unwrap(), "--out", &out_arg(&b)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (ma, mb) = (Manifest::read(&manifest).unwrap(), Manifest::read(&b.join("manifest.json")).unwrap());
    assert_eq!(ma.config.evolution, mb.config.evolution);
    assert_eq!(ma.config.xi, vec![[1.2, 0.6]]);
    assert_eq!(ma.outputs, mb.outputs);
    same_files(&a, &b, &ma.outputs);
}
