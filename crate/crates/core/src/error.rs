use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("vector has no nonzero entries")]
    ZeroVector,

    #[error("singular value decomposition limited to min(m, n) <= {limit}, got {actual}")]
    TooLargeForSvd { limit: usize, actual: usize },

    #[error("column-subset enumeration limited to n <= {limit}, got n = {actual}")]
    EnumerationLimit { limit: usize, actual: usize },

    #[error("row {row} of the matrix is zero but b[{row}] = {value}; the system is inconsistent")]
    InconsistentZeroRow { row: usize, value: f64 },

    #[error("x is not the soft shrinkage of x* (max deviation {deviation:e})")]
    NotASubgradient { deviation: f64 },

    #[error("residual is zero; the iterate already solves Ax = b")]
    ZeroResidual,

    #[error("degenerate search direction: ||A^T eta||^2 = {norm_sq:e}")]
    DegenerateDirection { norm_sq: f64 },

    #[error("matrix is rank deficient; the condition number is infinite")]
    RankDeficient,

    #[error("history lacks Bregman distance records")]
    MissingBregman,

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
