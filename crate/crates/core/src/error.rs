use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto a small set of exit codes: configuration/input problems, infeasible or
/// refuted problems, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("no excitation (zero auto-spectrum) at {} requested frequencies, first at omega = {:.6e}", .0.len(), .0.first().copied().unwrap_or(f64::NAN))]
    NoExcitation(Vec<f64>),

    #[error("sensitivity magnitude below threshold at {} frequencies, first at omega = {:.6e}", .0.len(), .0.first().copied().unwrap_or(f64::NAN))]
    SmallSensitivity(Vec<f64>),

    #[error("controller is not stable: {0}")]
    UnstableController(String),

    #[error("controller does not stabilize the plant: {0}")]
    Destabilizing(String),

    #[error("Bezout residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    BezoutResidual { residual: f64, tolerance: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
