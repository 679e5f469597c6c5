use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}, requested {requested:e}")]
    Quadrature {
        estimate: f64,
        error: f64,
        requested: f64,
    },

    #[error("M*Q = {value} exceeds 1 beyond numerical tolerance")]
    FactorOutOfRange { value: f64 },

    #[error(
        "closed-form exponent {closed} disagrees with cone-angle form {cone} (|diff| = {diff:e})"
    )]
    DualFormMismatch { closed: f64, cone: f64, diff: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
