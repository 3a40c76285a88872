use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} > tolerance {tolerance:.3e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },
    #[error("matrix is not skew-symmetric (residual {0:.3e})")]
    NotSkew(f64),
    #[error("matrix is not orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("implicit stage solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    ImplicitNoConvergence { iterations: usize, residual: f64 },
    #[error("configuration is not reducible to a Runge-Kutta scheme: {0}")]
    NotReducible(String),
    #[error("unsupported architecture spec: {0}")]
    UnsupportedSpec(String),
    #[error("block partition does not cover the hidden dimension: {0}")]
    BadPartition(String),
    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("problem too large: dimension {dim} exceeds {limit}")]
    TooLarge { dim: usize, limit: usize },
    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("projection onto the final clock block is numerically zero")]
    ZeroProjection,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
