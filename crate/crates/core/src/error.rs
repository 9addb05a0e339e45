use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid phase point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate adiabatic energies at R = {r:.6e}: gap {gap:.3e} below tolerance")]
    Degenerate { r: f64, gap: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("time step {dt:.3e} violates stability bound; use dt <= {suggested:.3e}")]
    Stability { dt: f64, suggested: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
