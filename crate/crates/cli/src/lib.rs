//! Scenario runner for the `entropic-time` toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod output;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{parse_config, ConfigError, Scenario, ScenarioConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";
pub const THREADS_VAR: &str = "ENTROPIC_TIME_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigError>),
    #[error("scenario {scenario} failed: {source}")]
    Scenario {
        scenario: Scenario,
        #[source]
        source: entropic_time::Error,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad value for {THREADS_VAR}: {0}")]
    Threads(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Threads(_) => 2,
            CliError::Scenario { .. } | CliError::Io { .. } => 1,
        }
    }

    /// Single-line JSON description for stderr.
    pub fn machine_line(&self) -> String {
        let value = match self {
            CliError::Config(errs) => serde_json::json!({
                "status": "error",
                "kind": "Config",
                "errors": errs.iter().map(|e| serde_json::json!({
                    "kind": e.kind(),
                    "line": e.line(),
                    "message": e.to_string(),
                })).collect::<Vec<_>>(),
            }),
            CliError::Scenario { scenario, source } => serde_json::json!({
                "status": "error",
                "kind": "Scenario",
                "scenario": scenario.name(),
                "message": source.to_string(),
            }),
            CliError::Io { path, source } => serde_json::json!({
                "status": "error",
                "kind": "Io",
                "path": path.display().to_string(),
                "message": source.to_string(),
            }),
            CliError::Threads(msg) => serde_json::json!({
                "status": "error",
                "kind": "Threads",
                "message": msg,
            }),
        };
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub config_sha256: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFile {
    pub name: String,
    pub contents: Vec<u8>,
}

impl RenderedFile {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.contents))
    }
}

/// Runs a scenario and renders its CSV (and SVG when `plot` is set) in memory.
pub fn render(cfg: &ScenarioConfig, plot: bool) -> Result<Vec<RenderedFile>, CliError> {
    let table = scenarios::run_scenario(cfg).map_err(|source| CliError::Scenario {
        scenario: cfg.scenario,
        source,
    })?;
    let name = cfg.output_name();
    let mut files = vec![RenderedFile {
        name: name.clone(),
        contents: table.to_csv(&cfg.sha256()).into_bytes(),
    }];
    if plot {
        let stem = name.strip_suffix(".csv").unwrap_or(&name);
        files.push(RenderedFile {
            name: format!("{stem}.svg"),
            contents: table.to_svg(cfg.scenario.name()).into_bytes(),
        });
    }
    Ok(files)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Renders, writes every file plus `manifest.json` into `out_dir`.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path, plot: bool) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let files = render(cfg, plot)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut entries = Vec::with_capacity(files.len());
    for f in &files {
        let path = out_dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(io_err(&path))?;
        entries.push(FileEntry {
            name: f.name.clone(),
            sha256: f.sha256(),
            bytes: f.contents.len(),
        });
    }
    let manifest = RunManifest {
        version: VERSION.to_string(),
        scenario: cfg.scenario.name().to_string(),
        config: cfg.echo(),
        config_sha256: cfg.sha256(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: entries,
    };
    let path = out_dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn run_file(config_path: &Path, out_dir: &Path, plot: bool) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(config_path).map_err(io_err(config_path))?;
    let cfg = parse_config(&text).map_err(CliError::Config)?;
    run(&cfg, out_dir, plot)
}

/// Caps the global rayon pool from `ENTROPIC_TIME_THREADS`, when set.
pub fn configure_threads() -> Result<Option<usize>, CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Threads(format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_is_surfaced_with_values() {
        let cfg = parse_config("scenario = gas-mixing\nN = 1\nT = 2\ndT = 3\n").unwrap();
        let err = render(&cfg, false).unwrap_err();
        let line = err.machine_line();
        assert!(line.contains("\"scenario\":\"gas-mixing\""));
        assert!(line.contains('3') && line.contains('2'), "{line}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn config_errors_render_as_one_json_line() {
        let err = CliError::Config(parse_config("scenario = grw-ensemble\nbogus = 1\n").unwrap_err());
        let line = err.machine_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["errors"].as_array().unwrap().len(), 2);
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn every_scenario_renders_with_small_settings() {
        let configs = [
            "scenario = dem-step\nJ = 64\nsamples = 5",
            "scenario = dem-thermal\nJ = 64\nsamples = 5",
            "scenario = dem-discrete\nfrequencies = 0, 1, 2\nweights = 0.2, 0.5, 0.3\nt_max = 3\nsamples = 4",
            "scenario = epoch-chain\nseed = 1",
            "scenario = multipartite-chain\nseed = 1",
            "scenario = grw-trajectory\nseed = 1\npoints = 41\nsamples = 4",
            "scenario = grw-ensemble\nseed = 1\npoints = 41\nsamples = 3\nn_traj = 70",
            "scenario = master-eq\npoints = 41\nsamples = 3\nt_max = 0.5",
            "scenario = energy-audit\nseed = 1\nJ = 64\nsamples = 5",
            "scenario = bipartite-random\nseed = 1\nstates = 5",
            "scenario = thermo-clausius\nhalvings = 2",
            "scenario = gas-mixing\nN = 1\nT = 2\ndT = 1",
        ];
        for text in configs {
            let cfg = parse_config(text).unwrap();
            let files = render(&cfg, true).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(files.len(), 2);
            let csv = String::from_utf8(files[0].contents.clone()).unwrap();
            assert!(csv.starts_with(&format!("# config_sha256={}\n", cfg.sha256())));
            assert!(csv.lines().count() > 2, "{text}");
        }
    }
}
