use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("malformed {kind} file {path}: {reason}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("unknown preset `{0}` (expected one of NTK, LeCun, He, Xavier)")]
    UnknownPreset(String),

    #[error("slope fit needs at least two usable widths, got {0}")]
    TooFewPoints(usize),

    #[error("every run diverged for gamma2={gamma2}, gamma3={gamma3}")]
    SweepFailed { gamma2: f64, gamma3: f64 },

    #[error("configs do not share phase coordinates: {0}")]
    GammaMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
