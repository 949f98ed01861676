use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_entropic-time");

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env("ENTROPIC_TIME_THREADS", "2")
        .output()
        .unwrap()
}

const ENSEMBLE: &str = "# small ensemble\nscenario = grw-ensemble\nseed = 7\npoints = 41\nsamples = 4\nt_max = 1\nn_traj = 130\n";

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run(ENSEMBLE, a.path(), &[]).status.success());
    assert!(run(ENSEMBLE, b.path(), &[]).status.success());
    let csv = |d: &Path| fs::read(d.join("out/grw-ensemble.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
}

#[test]
fn manifest_lists_files_with_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(ENSEMBLE, dir.path(), &["--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"], "grw-ensemble");
    assert_eq!(manifest["config"]["seed"], "7");
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let bytes = fs::read(dir.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    let csv = fs::read_to_string(dir.path().join("out/grw-ensemble.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert_eq!(first, format!("# config_sha256={}", manifest["config_sha256"].as_str().unwrap()));
    let svg = fs::read_to_string(dir.path().join("out/grw-ensemble.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_errors_exit_2_with_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("scenario = thermo-clausius\nV = abc\nnope = 1\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let line = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["kind"], "Config");
    let lines: Vec<u64> = v["errors"].as_array().unwrap().iter().map(|e| e["line"].as_u64().unwrap()).collect();
    assert_eq!(lines, vec![2, 3]);
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn run_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("scenario = gas-mixing\nN = 10\nT = 1\ndT = 2\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(v["kind"], "Scenario");
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "scenario = thermo-clausius\n").unwrap();
    let out = Command::new(BIN).arg("run").arg(&cfg).env("ENTROPIC_TIME_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
