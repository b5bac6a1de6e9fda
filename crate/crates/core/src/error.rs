use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("time step {dt:.3e} exceeds the stable bound {stable:.3e}")]
    Stability { dt: f64, stable: f64 },

    #[error("blow-up at t = {time:.6}: {reason} (last good ‖z‖₂ = {last_l2:.4e}, ‖z‖∞ = {last_linf:.4e})")]
    BlowUp {
        time: f64,
        reason: String,
        last_l2: f64,
        last_linf: f64,
    },

    #[error("estimate violated: {0}")]
    EstimateViolation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the scenario that produced it.
    pub fn in_scenario(self, scenario: &str) -> Self {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
