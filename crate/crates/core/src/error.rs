use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid conductance function: {0}")]
    InvalidConductance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("interval is reversed: a = {a} > b = {b}")]
    ReversedInterval { a: f64, b: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("state space too large for exact oracle: 2^{sites} states")]
    StateSpaceTooLarge { sites: usize },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite value in solver state at t = {0}")]
    NonFinite(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
