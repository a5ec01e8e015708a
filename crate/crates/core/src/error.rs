use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate pair {pair}: both entries are zero")]
    DegeneratePair { pair: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("solver state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("non-finite objective value at probe point")]
    NonFiniteValue,

    #[error("chain is empty")]
    EmptyChain,

    #[error("reference signal has zero norm")]
    ZeroSignal,
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegeneratePair { .. } => "DegeneratePair",
            Error::DomainViolation(_) => "DomainViolation",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::NonFiniteValue => "NonFiniteValue",
            Error::EmptyChain => "EmptyChain",
            Error::ZeroSignal => "ZeroSignal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
