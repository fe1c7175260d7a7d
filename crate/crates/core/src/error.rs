use thiserror::Error;

use crate::dynamics::InvertibilityReport;
use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed config, wrong shapes, invalid generator.
    Validation,
    /// The input was accepted but the computation could not be completed.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector length {0} is not a perfect square")]
    NotSquareLength(usize),

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error(
        "generator does not preserve Hermiticity (coefficient matrix deviation {deviation:e})"
    )]
    NotHermiticityPreserving { deviation: f64 },

    #[error("generator is not trace-annihilating (residual {residual:e})")]
    NotTraceAnnihilating { residual: f64 },

    #[error("invalid dynamical map at index {index}: {reason}")]
    InvalidMap { index: usize, reason: String },

    #[error("channel operator has Hilbert-Schmidt norm {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("channel operator is not traceless (trace magnitude {trace:e})")]
    NotTraceless { trace: f64 },

    #[error("dynamical map is singular at t = {} (condition number {:e})", .0.time, .0.condition_number)]
    Singular(InvertibilityReport),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("predictor-corrector diverged at t = {time} with step {step}; use a smaller step")]
    Divergence { time: f64, step: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Singular(_)
            | Error::NonFinite(_)
            | Error::Divergence { .. }
            | Error::NotApplicable(_)
            | Error::Io(_) => ErrorClass::Numerical,
            Error::Expr(ExprError::Eval { .. }) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
