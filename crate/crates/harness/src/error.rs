use std::path::PathBuf;

use thiserror::Error;
use twinsim_core::{FairnessError, MappingError, MetricError, TwinError};
use twinsim_gateway::GatewayError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("no corpus in {0}; run `ingest` first")]
    NoCorpus(PathBuf),
    #[error("persona `{0}` is not in the corpus")]
    UnknownPersona(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} cells failed")]
    IncompleteRun { failed: usize, total: usize },
    #[error("{what}: {count}")]
    Skipped { what: &'static str, count: usize },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::UnreadableFile { .. } => "UnreadableFile",
            HarnessError::SchemaMismatch(_) => "SchemaMismatch",
            HarnessError::UnknownRun(_) => "UnknownRun",
            HarnessError::NoCorpus(_) => "NoCorpus",
            HarnessError::UnknownPersona(_) => "UnknownPersona",
            HarnessError::Config(_) => "InvalidConfig",
            HarnessError::Usage(_) => "UsageError",
            HarnessError::IncompleteRun { .. } => "IncompleteRun",
            HarnessError::Skipped { .. } => "Skipped",
            HarnessError::Mapping(_) => "MappingError",
            HarnessError::Twin(_) => "TwinError",
            HarnessError::Metric(_) => "MetricError",
            HarnessError::Fairness(_) => "FairnessError",
            HarnessError::Gateway(e) => e.kind(),
            HarnessError::Io(_) => "IoError",
            HarnessError::Json(_) => "JsonError",
            HarnessError::Csv(_) => "CsvError",
        }
    }

    /// 2 for usage problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn unreadable(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::UnreadableFile { path: path.into(), source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
