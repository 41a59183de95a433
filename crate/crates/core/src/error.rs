use thiserror::Error;

/// Errors produced by the simulator, controllers and analysis tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported prediction horizon N = {horizon} (supported: {supported})")]
    UnsupportedHorizon { horizon: usize, supported: &'static str },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("bad value for config key `{key}`: {reason}")]
    BadValue { key: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("simulation diverged at t = {t:.6} s: {what}")]
    Diverged { t: f64, what: String },

    #[error("analysis window spans {periods:.6} fundamental periods, expected an integer")]
    NonIntegerPeriods { periods: f64 },

    #[error("fundamental amplitude {amplitude:e} is below the detection floor")]
    NoFundamental { amplitude: f64 },

    #[error("empty analysis window")]
    EmptyWindow,

    #[error("signal never settles inside the ±{band} band after t = {t_disturb} s")]
    NotRecovered { band: f64, t_disturb: f64 },

    #[error("trace grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
