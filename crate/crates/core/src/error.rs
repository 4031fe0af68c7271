#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("density is not faithful (smallest eigenvalue {0:e})")]
    NotFaithful(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("word of length {len} exceeds the truncation degree {max_degree}")]
    TruncationTooShallow { len: usize, max_degree: usize },
    #[error("malformed word: {0}")]
    WordSyntax(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
