use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("invalid area data: {0}")]
    Geometry(String),
    #[error("position {x} m outside tract [0, {l}] m")]
    OutOfRange { x: f64, l: f64 },
    #[error("CFL number {cfl:.4} must be below 1")]
    Cfl { cfl: f64 },
    #[error("numerical blow-up at step {step}: {what}")]
    BlowUp { step: usize, what: String },
    #[error("no oscillation detected: {0}")]
    NoOscillation(String),
    #[error("cycle not steady: closure error {closure:.3e} exceeds {tol:.1e}")]
    NotSteady { closure: f64, tol: f64 },
    #[error("record too short: {0}")]
    TooShort(String),
    #[error("non-finite value at tape node {node}")]
    NonFinite { node: usize },
    #[error("non-finite loss in minibatch {batch}")]
    NanLoss { batch: usize },
    #[error("training diverged at epoch {epoch}: loss {loss:.3e}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("LPC solve failed: {0}")]
    Lpc(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    /// Stable snake-case tag of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::ConfigParse(_) => "config_parse",
            Error::InvalidParam { .. } => "invalid_param",
            Error::Geometry(_) => "geometry",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Cfl { .. } => "cfl",
            Error::BlowUp { .. } => "blow_up",
            Error::NoOscillation(_) => "no_oscillation",
            Error::NotSteady { .. } => "not_steady",
            Error::TooShort(_) => "too_short",
            Error::NonFinite { .. } => "non_finite",
            Error::NanLoss { .. } => "nan_loss",
            Error::Diverged { .. } => "diverged",
            Error::Lpc(_) => "lpc",
            Error::Analysis(_) => "analysis",
            Error::Format(_) => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
