use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] phasecap::Error),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: {message}")]
    Json { path: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        CliError::Json { path: path.display().to_string(), message: e.to_string() }
    }

    fn kind(&self) -> &'static str {
        use phasecap::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidInput(_) => "invalid_input",
                E::NotPositiveSemidefinite { .. } => "not_positive_semidefinite",
                E::NotPositiveDefinite => "not_positive_definite",
                E::InvalidBlocks(_) => "invalid_blocks",
                E::DegenerateForm(_) => "degenerate_form",
                E::Ingest { .. } => "ingest",
                E::DegenerateScatter => "degenerate_scatter",
                E::GeneralPositionFailure => "general_position_failure",
                E::TooLarge { .. } => "too_large",
                E::FlowOverflow { .. } => "flow_overflow",
            },
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            row: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            col: Option<usize>,
        }
        let (row, col) = match self {
            CliError::Core(phasecap::Error::Ingest { row, col, .. }) => (Some(*row), *col),
            _ => (None, None),
        };
        serde_json::to_string(&Payload { error: self.kind(), message: self.to_string(), row, col })
            .expect("error payload serializes")
    }
}
