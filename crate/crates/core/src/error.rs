use thiserror::Error;

/// Errors raised by the solvers, integrators and systems in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in linear solve")]
    SingularJacobian,

    #[error("non-finite value encountered: {0}")]
    NonFiniteValue(String),

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("seed pair momentum {found:e} differs from target {expected:e}")]
    MomentumMismatch { expected: f64, found: f64 },

    #[error("unsupported Gauss stage count {0} (only 1 and 2 are available)")]
    UnsupportedStageCount(usize),

    #[error("relative drift undefined: reference value is zero")]
    DivisionByZero,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
