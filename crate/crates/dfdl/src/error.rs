//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inputs violate a documented precondition (dimension mismatch,
    /// out-of-range parameter, invariant violation).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative solver ran out of iterations. `gap` is the final
    /// stationarity violation, so callers can judge how close it got.
    #[error("{context}: no convergence after {iterations} iterations (gap {gap:.3e})")]
    Convergence {
        context: &'static str,
        iterations: usize,
        gap: f64,
    },

    /// A numerical routine failed (eigen-solver stall, non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Training cannot continue (e.g. the regularizer underflowed while
    /// chasing positive semidefiniteness).
    #[error("training failed: {0}")]
    Training(String),

    /// Malformed file contents (image, manifest, or model payload).
    #[error("format error: {0}")]
    Format(String),

    /// A model file written by an incompatible release.
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    /// I/O failure, with the path that caused it.
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
