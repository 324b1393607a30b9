use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("invalid index range: {0}")]
    InvalidRange(String),
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("singular constant: {0}")]
    SingularConstant(String),
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("unknown target function `{0}`")]
    UnknownTarget(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that indicate a broken numerical invariant rather
    /// than a bad request.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalInconsistency(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
