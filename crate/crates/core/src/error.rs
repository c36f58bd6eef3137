use alloc::string::String;

/// Errors raised by the numerical kernels and the fitting engines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(&'static str),
    #[error("Bessel argument {0:e} is outside the representable range")]
    Overflow(f64),
    #[error("observation coincides with the shift parameter (delta = {delta:e})")]
    AtShiftPoint { delta: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("component {component} is empty (soft count {count:.3} below floor {floor})")]
    EmptyComponent { component: usize, count: f64, floor: usize },
    #[error("covariance of component {component} could not be repaired to positive definite")]
    CovarianceRepairFailed { component: usize },
    #[error("class {class} has no labeled observations")]
    MissingClassExamples { class: usize },
    #[error("non-finite log-likelihood encountered at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("every annealing restart failed; last error: {0}")]
    AllRestartsFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid data: {0}")]
    InvalidData(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
