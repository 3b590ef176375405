use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e} exceeds {limit:e})")]
    NotHermitian { asymmetry: f64, limit: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} below {limit:e})")]
    NotPsd { eigenvalue: f64, limit: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("singular matrix")]
    Singular,

    #[error("singular per-packet covariance at index {index}")]
    SingularCovariance { index: usize },

    #[error("line search failed: {0}")]
    OptimizerFailure(String),
}
