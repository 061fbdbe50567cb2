//! One error type for the whole front end, with a stable machine-readable
//! kind for `error.json`.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input file for {role} not found: {path}")]
    MissingInput { role: &'static str, path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{table} header must be {expected:?}, got {got:?}")]
    BadHeader {
        table: &'static str,
        expected: String,
        got: String,
    },
    #[error("{table} record {line}: {message}")]
    Row {
        table: &'static str,
        line: u64,
        message: String,
    },
    #[error("{table} is missing location ids: {}", ids.join(", "))]
    MissingIds { table: &'static str, ids: Vec<String> },
    #[error("{table} has ids absent from the locations table: {}", ids.join(", "))]
    UnknownIds { table: &'static str, ids: Vec<String> },
    #[error("{table} lists id {id:?} more than once")]
    DuplicateId { table: &'static str, id: String },
    #[error(transparent)]
    Geo(#[from] funscan::geo::GeoError),
    #[error(transparent)]
    Fda(#[from] funscan::fda::FdaError),
    #[error(transparent)]
    Glm(#[from] funscan::glm::GlmError),
    #[error(transparent)]
    Adjust(#[from] funscan::adjust::AdjustError),
    #[error(transparent)]
    Scan(#[from] funscan::scan::ScanError),
    #[error(transparent)]
    Sim(#[from] funscan::sim::SimError),
}

impl CliError {
    /// Stable category written to `error.json`.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::MissingInput { .. } => "config",
            CliError::Io { .. } | CliError::Json { .. } => "io",
            CliError::BadHeader { .. }
            | CliError::Row { .. }
            | CliError::MissingIds { .. }
            | CliError::UnknownIds { .. }
            | CliError::DuplicateId { .. } => "ingest",
            CliError::Geo(_)
            | CliError::Fda(_)
            | CliError::Glm(_)
            | CliError::Adjust(_)
            | CliError::Scan(_)
            | CliError::Sim(_) => "pipeline",
        }
    }
}
