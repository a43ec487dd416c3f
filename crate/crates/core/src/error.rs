use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("behavior probability must be positive, got {0}")]
    DegenerateBehaviorProbability(f64),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("schedule domain error: {0}")]
    ScheduleDomain(String),

    #[error("human and random baselines coincide ({0}); normalized score is undefined")]
    UndefinedBaseline(f64),

    #[error("replay not ready: {stored} sequences stored, {required} required")]
    NotReady { stored: usize, required: usize },

    #[error("environment protocol error: {0}")]
    Protocol(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
