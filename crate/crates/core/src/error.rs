use thiserror::Error;

/// Errors raised by the simulator and its diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hyperbolicity lost: 1 + v^p <= floor at v = {v}, p = {p}")]
    HyperbolicityLoss { v: f64, p: u32 },

    #[error("characteristic u = {u} left the grid interior at r = {r}")]
    FanEscape { u: f64, r: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("needs more samples: {0}")]
    NeedsMoreSamples(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{key}: {message}")]
    ConfigValidation { key: String, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
