use thiserror::Error;

/// Errors produced by the estimators, ground-truth moments and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {required} sample points, got {got}")]
    InsufficientSample { required: usize, got: usize },

    #[error("degenerate bandwidth: all points coincide")]
    DegenerateBandwidth,

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("R-KMSE requires n*rho > varrho (positive off-diagonal mean), got n*rho = {n_rho}, varrho = {varrho}")]
    RkmsePrecondition { n_rho: f64, varrho: f64 },

    #[error("K + n*lambda*I is not numerically positive definite (n = {n}, lambda = {lambda})")]
    NotPositiveDefinite { n: usize, lambda: f64 },

    #[error("leave-one-out system is singular at i = {index} (lambda = {lambda})")]
    SingularLeaveOneOut { index: usize, lambda: f64 },

    #[error("no grid value produced a finite LOOCV score")]
    SelectionFailed,

    #[error("class {class:?} has {got} points, need at least {required}")]
    InsufficientClass {
        class: String,
        got: usize,
        required: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = KmseError> = std::result::Result<T, E>;

impl From<std::io::Error> for KmseError {
    fn from(e: std::io::Error) -> Self {
        KmseError::Io(e.to_string())
    }
}

impl From<csv::Error> for KmseError {
    fn from(e: csv::Error) -> Self {
        KmseError::Io(e.to_string())
    }
}
