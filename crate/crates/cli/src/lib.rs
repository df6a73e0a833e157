//! Pipelines behind the `pdca` binary: image segmentation, point-cloud
//! clustering, preconditioner/step-size benchmarks and graph export.
//!
//! Every run resolves its flags into a [`RunConfig`], writes it next to the
//! outputs as `run_config.json`, and can be replayed from that file.

pub mod config;
pub mod run;

pub use config::RunConfig;
pub use run::{execute, run_bench, run_cluster, run_graph, run_segment};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "PDCA_THREADS";

/// Failure classified for the process exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad flags, unreadable or malformed input (exit code 2).
    Input(String),
    /// The computation itself failed (exit code 1).
    Compute(String),
}

impl RunError {
    pub fn input(msg: impl Into<String>) -> Self {
        RunError::Input(msg.into())
    }

    pub fn compute(msg: impl Into<String>) -> Self {
        RunError::Compute(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 2,
            RunError::Compute(_) => 1,
        }
    }

    /// Prefix the message with the pipeline stage.
    pub fn context(self, stage: &str) -> Self {
        match self {
            RunError::Input(m) => RunError::Input(format!("{stage}: {m}")),
            RunError::Compute(m) => RunError::Compute(format!("{stage}: {m}")),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(m) => write!(f, "input error: {m}"),
            RunError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<pdca::Error> for RunError {
    fn from(e: pdca::Error) -> Self {
        if e.is_input_error() {
            RunError::Input(e.to_string())
        } else {
            RunError::Compute(e.to_string())
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Input(format!("config json: {e}"))
    }
}
