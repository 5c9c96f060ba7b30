//! Scenario runner behind the `habopt` command line tool.
//!
//! A run reads one JSON config, validates it completely, then writes CSV tables, JSON
//! documents, SVG figures and a `manifest.json` into the output directory. Exit codes:
//! 0 success, 2 invalid config (nothing written), 3 solver failure (partial artifacts
//! and the manifest are kept).

pub mod config;
pub mod output;
pub mod scenarios;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

pub use config::{ConfigError, Resolved, Scenario, ScenarioConfig};
use output::Artifacts;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT_DIR: &str = "habopt-out";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] habopt_core::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 1,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            RunError::Config(_) => "invalid_config",
            RunError::Solver(_) => "solver_failure",
            RunError::Io(_) => "io_failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub scenario: Scenario,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// Directory holding the artifacts, absent when nothing was written.
    pub out_dir: Option<PathBuf>,
    pub error: Option<RunError>,
}

/// Validates the invocation and its config without touching the file system.
pub fn prepare(inv: &Invocation) -> Result<(Resolved, PathBuf), ConfigError> {
    if inv.threads == Some(0) {
        return Err(ConfigError {
            field: "--threads".into(),
            message: "must be at least 1".into(),
        });
    }
    let cfg = config::load(&inv.config)?;
    let base = inv.config.parent().unwrap_or(Path::new("."));
    let mut resolved = config::resolve(cfg, inv.scenario, inv.seed, base)?;
    let out = inv
        .out
        .clone()
        .or_else(|| resolved.echo.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    resolved.echo.output_dir = Some(out.clone());
    Ok((resolved, out))
}

pub fn execute(inv: &Invocation) -> Outcome {
    let started = Instant::now();
    let (resolved, out_dir) = match prepare(inv) {
        Ok(v) => v,
        Err(e) => {
            return Outcome {
                exit_code: 2,
                out_dir: None,
                error: Some(e.into()),
            }
        }
    };
    let mut artifacts = match Artifacts::create(&out_dir) {
        Ok(a) => a,
        Err(e) => {
            return Outcome {
                exit_code: 1,
                out_dir: None,
                error: Some(e.into()),
            }
        }
    };

    let result = with_threads(inv.threads, || scenarios::run(&resolved, &mut artifacts));
    let result = match (result, artifacts.flush_tables()) {
        (Ok(v), Ok(())) => Ok(v),
        (Err(e), _) => Err(e),
        (Ok(_), Err(e)) => Err(e.into()),
    };
    let manifest = manifest(inv, &resolved, &artifacts, &result, started.elapsed().as_secs_f64());
    let result = result.and_then(|_| artifacts.write_json("manifest.json", &manifest).map_err(RunError::from));
    match result {
        Ok(_) => Outcome {
            exit_code: 0,
            out_dir: Some(out_dir),
            error: None,
        },
        Err(e) => {
            // the manifest of a failed run is best effort
            let _ = artifacts.write_json("manifest.json", &manifest);
            Outcome {
                exit_code: e.exit_code(),
                out_dir: Some(out_dir),
                error: Some(e),
            }
        }
    }
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn manifest(
    inv: &Invocation,
    resolved: &Resolved,
    artifacts: &Artifacts,
    result: &Result<Value, RunError>,
    wall_time: f64,
) -> Value {
    let (status, error, summary) = match result {
        Ok(v) => ("ok", Value::Null, v.clone()),
        Err(e) => (e.status(), json!(e.to_string()), Value::Null),
    };
    json!({
        "schema": "habopt-manifest",
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "scenario": resolved.scenario.name(),
        "status": status,
        "error": error,
        "seed": resolved.seed,
        "threads": inv.threads,
        "versions": {
            "habopt": env!("CARGO_PKG_VERSION"),
            "habopt_core": habopt_core::VERSION,
        },
        "config": resolved.echo,
        "summary": summary,
        "artifacts": artifacts.files().into_iter().filter(|f| f != "manifest.json").collect::<Vec<_>>(),
        "wall_time_seconds": wall_time,
    })
}
