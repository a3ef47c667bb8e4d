use std::io;
use std::path::{Path, PathBuf};

use rolecycle_core::config::InvalidConfig;
use rolecycle_core::event::IngestError;
use rolecycle_core::lifecycle::LifecycleError;
use rolecycle_core::pipeline::PipelineError;
use rolecycle_core::steering::SteeringError;
use rolecycle_core::synth::SynthError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Config(#[from] InvalidConfig),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Steering(#[from] SteeringError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io_error",
            CliError::Parse { .. } => "parse_error",
            CliError::Usage(_) => "usage",
            CliError::Ingest(IngestError::MalformedRecord { .. }) => "malformed_record",
            CliError::Ingest(IngestError::OrderingConflict { .. }) => "ordering_conflict",
            CliError::Ingest(IngestError::ClockSkew { .. }) => "clock_skew",
            CliError::Ingest(_) => "ingest_error",
            CliError::Config(_) => "invalid_config",
            CliError::Pipeline(_) => "pipeline_error",
            CliError::Lifecycle(LifecycleError::NoObservations) => "no_observations",
            CliError::Lifecycle(_) => "invalid_matrix",
            CliError::Steering(SteeringError::EmptyCatalog) => "empty_catalog",
            CliError::Steering(SteeringError::InvalidEdit { .. }) => "invalid_edit",
            CliError::Steering(_) => "steering_error",
            CliError::Synth(_) => "invalid_profile",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}
