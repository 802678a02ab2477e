use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CraneError {
    #[error("{name} = {value} lies outside the domain [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter `{field}`: {rule}")]
    InvalidParameter { field: String, rule: String },

    #[error("shape mismatch: expected {expected} samples, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("CFL condition violated: max(lambda) dt/dx = {ratio:.6} > 1")]
    Cfl { ratio: f64 },

    #[error("kernel march diverged at x = {x:.4}, xi = {xi:.4} (|value| = {magnitude:e})")]
    Divergence { x: f64, xi: f64, magnitude: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("homogeneous norm is undefined at the origin")]
    UndefinedNorm,

    #[error("degenerate state: {0}")]
    Degenerate(&'static str),

    #[error("time {t} outside recorded history [{start}, {end}]")]
    HistoryGap { t: f64, start: f64, end: f64 },

    #[error("incompatible initial data: {0}")]
    IncompatibleInitialData(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CraneError {
    /// Configuration problems map to exit code 2, everything numerical to 3.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            CraneError::InvalidParameter { .. }
                | CraneError::Cfl { .. }
                | CraneError::Parse { .. }
                | CraneError::IncompatibleInitialData(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CraneError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CraneError>;
