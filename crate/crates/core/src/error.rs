use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation produced a non-finite position at step {step}")]
    NonFiniteState { step: usize },

    #[error("track would keep {kept} observation(s); at least 2 are required")]
    TooFewObservations { kept: usize },

    #[error("interval length {dt} does not match the bridge geometry (h * (N + 1) = {expected})")]
    GeometryMismatch { dt: f64, expected: f64 },

    #[error("non-finite log-density on interval {index}")]
    NonFiniteInterval { index: usize },

    #[error("objective is not finite at the initial parameters")]
    NonFiniteObjective,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
