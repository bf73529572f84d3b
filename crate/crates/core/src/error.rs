use thiserror::Error;

/// Errors produced anywhere in the estimation and analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    NotPositiveSemidefinite { min_eig: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid form blocks: {0}")]
    InvalidBlocks(String),

    #[error("degenerate symplectic form: {0}")]
    DegenerateForm(String),

    #[error("ingest error at row {row}{}: {message}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Ingest {
        /// 1-based line number in the source (header counts as a row).
        row: usize,
        col: Option<usize>,
        message: String,
    },

    #[error("degenerate scatter matrix")]
    DegenerateScatter,

    #[error("no candidate subset is in general position")]
    GeneralPositionFailure,

    #[error("enumeration too large: {count} subsets exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("flow map overflowed (t = {t})")]
    FlowOverflow { t: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
