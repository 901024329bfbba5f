use thiserror::Error;

/// Errors produced by state construction, kernel application and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Inverse of the zero scalar.
    #[error("cannot invert zero")]
    ZeroInverse,
    /// Operands disagree on arity, base or mode.
    #[error("state mismatch: {0}")]
    Mismatch(String),
    /// A state grew past its configured support cap.
    #[error("support cap exceeded: {terms} terms > cap {cap}")]
    SupportCap { terms: usize, cap: usize },
    /// Digit surgery tried to drive a label negative.
    #[error("digit surgery would produce a negative dyadic")]
    NegativeDyadic,
    /// Caller error: bad argument, malformed request.
    #[error("usage: {0}")]
    Usage(String),
    /// Malformed state file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
