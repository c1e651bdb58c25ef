use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// Two inputs that must agree (grid sizes, file metadata vs scenario) do not.
    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations (last change {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("simulation diverged at t = {t} (|u| = {magnitude:e})")]
    Divergence { t: f64, magnitude: f64 },

    #[error("infeasible parameter selection: {0}")]
    Infeasible(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Divergence { .. }
                | Error::Infeasible(_)
                | Error::Invariant(_)
        )
    }
}
