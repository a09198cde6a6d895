use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: unexpected header {found:?}, expected {expected:?}", path.display())]
    Header {
        path: PathBuf,
        found: Vec<String>,
        expected: Vec<String>,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no data: {0}")]
    Empty(String),

    #[error("overlapping label intervals for user {user}: [{first_start}, {first_end}) and [{second_start}, {second_end})")]
    OverlappingLabels {
        user: String,
        first_start: i64,
        first_end: i64,
        second_start: i64,
        second_end: i64,
    },

    #[error("truncated SVD did not converge after {iterations} iterations (residual norm {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no leading dimension: table is independent")]
    IndependentTable,

    #[error("scores are constant; normalization needs at least two distinct values")]
    ConstantScores,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::IndependentTable | Error::ConstantScores
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
