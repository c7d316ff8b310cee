use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, XimError>;

#[derive(Debug, Error)]
pub enum XimError {
    /// A cell could not be read as a number. Row and column are 1-based.
    #[error("parse error at (row {row}, col {col}): {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    /// Ragged rows, non-square matrices and similar layout problems.
    #[error("structure error: {0}")]
    Structure(String),

    /// A value outside the admissible domain (negative distance, NaN, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Inputs for which a quantity is mathematically undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl XimError {
    pub fn config(msg: impl Into<String>) -> Self {
        XimError::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        XimError::Domain(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        XimError::Structure(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        XimError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_shape(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(XimError::Shape {
            what,
            expected,
            found,
        })
    }
}
