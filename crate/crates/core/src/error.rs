use thiserror::Error;

/// Errors raised by the library. Configuration problems are reported before
/// any run starts; numerical failures are reported as data (divergence
/// flags, warning flags) rather than errors wherever the caller can recover.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("missing constant `{0}` for the requested bound")]
    MissingConstant(&'static str),

    #[error("step schedule {0} requires a clip level")]
    MissingClipLevel(&'static str),

    #[error("trajectory diverged at step {last_finite}")]
    Diverged { last_finite: usize },

    #[error("trajectory does not carry realized noise records")]
    MissingNoise,

    #[error("not enough points for a rate fit: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("non-positive metric {value} at T={t}")]
    NonPositiveMetric { t: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
