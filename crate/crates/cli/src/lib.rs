//! Library side of the `cmcl` binary: configuration, data loading, metrics
//! logging and one function per subcommand.

pub mod commands;
pub mod config;
pub mod data;
pub mod metrics;

use cmcl_core::corpus::CorpusError;
use cmcl_core::curriculum::TrainError;
use cmcl_core::model::ModelError;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Divergence(String),
    #[error("gradient check failed")]
    GradCheckFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::GradCheckFailed => 1,
            CliError::Config(_) | CliError::Data(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(m) => CliError::Io(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergence { .. } => CliError::Divergence(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::InvalidPlan(_) | TrainError::UnknownPreset(_) | TrainError::MissingCorpus(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
