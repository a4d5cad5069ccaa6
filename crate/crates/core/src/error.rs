use alloc::string::String;
use core::fmt;

/// Errors surfaced by the numeric kernels and the solver drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector/matrix dimensions do not agree for the requested operation.
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A matrix required to be symmetric is not (beyond round-off).
    Asymmetric(&'static str),
    /// A linear system had no usable pivot.
    Singular(&'static str),
    /// A parameter is outside its domain of validity.
    InvalidParam(String),
    /// The solver configuration violates a run-start precondition.
    Config(String),
    /// The requested combination of options is not supported.
    Unsupported(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::Asymmetric(what) => write!(f, "{what} must be symmetric"),
            Error::Singular(what) => write!(f, "singular system in {what}"),
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported configuration: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
