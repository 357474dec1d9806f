//! Experiment runner: JSON configs in, CSV/JSON/PGM artifacts and a
//! replayable manifest out.

pub mod config;
pub mod ensemble;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Manifest, SeedEntry};
pub use ensemble::{run_ensemble, EnsembleResult, EnsembleSpec, IntensitySpec, ProfileSpec};
pub use run::{load_config, run, run_from_path, RunOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dgff::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Threads(_) => "threads",
        }
    }

    /// `{"error": kind, "message": text}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Environment variable holding the worker count.
pub const THREADS_ENV: &str = "DGFF_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`] if set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Threads(e.to_string()))
}

/// RNG stream of replica `rep` at resolution `n`.
pub fn replica_stream(rep: usize, n: u32) -> u64 {
    rep as u64 + ((n as u64) << 32)
}

/// RNG stream of chaos replica `rep`.
pub fn chaos_stream(rep: usize) -> u64 {
    rep as u64 + (1u64 << 62)
}
