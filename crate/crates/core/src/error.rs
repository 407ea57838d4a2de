use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input coordinates")]
    NonFiniteInput,
    #[error("direction inside the smoothness cone: F(v) = {norm:e} below guard {guard:e}")]
    ConeViolation { norm: f64, guard: f64 },
    #[error("fundamental tensor is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    DegenerateTensor { min_eigenvalue: f64 },
    #[error("fundamental tensor numerically singular (condition {condition:e})")]
    SingularTensor { condition: f64 },
    #[error("wind too strong: h(W, W) = {wind_norm_sq} is not below 1")]
    WindTooStrong { wind_norm_sq: f64 },
    #[error("integration step underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("map differential is rank deficient (smallest singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("determinant vanishes on the whole window")]
    WindowDegenerate,
    #[error("dimension of V(t) dropped to {found} (expected {expected}) at t = {t}")]
    DimensionDrop { t: f64, expected: usize, found: usize },
    #[error("no shot reached the target (best miss {miss:e})")]
    NotReached { miss: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    InvalidInput(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
