use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `line` and `column` are 1-based.
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("gene {gene}: zero within-group variance but group means differ")]
    DegenerateGene { gene: String },

    /// Cholesky breakdown; `leading_minor` is the 1-based order of the first
    /// leading minor that is not positive.
    #[error("{stage} Cholesky factorization failed at leading minor {leading_minor}")]
    NotPositiveDefinite {
        stage: &'static str,
        leading_minor: usize,
    },

    #[error("solve rejected: backward error {backward_error:e} exceeds {tolerance:e}")]
    InaccurateSolve { backward_error: f64, tolerance: f64 },

    #[error("unknown gene id {0}")]
    UnknownGene(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
