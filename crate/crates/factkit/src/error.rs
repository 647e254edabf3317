use factkit_core::agreement::AgreementError;
use factkit_core::baseline::BaselineError;
use factkit_core::distribution::DistributionError;
use factkit_core::embedding::EmbeddingError;
use factkit_core::kmeans::KMeansError;
use factkit_core::metrics::MetricsError;
use factkit_core::model::{ModelError, TrainError};
use factkit_core::split::SplitError;
use factkit_core::taxonomy::CanonError;
use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::config::ConfigError;
use crate::embfile::EmbFileError;
use crate::facts::DataError;
use crate::provider::FetchError;

/// Any failure of a subcommand. Each variant maps to its own exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("line {line} ({id}): {source}")]
    Canon {
        line: usize,
        id: String,
        #[source]
        source: CanonError,
    },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Sampling(#[from] KMeansError),
    #[error(transparent)]
    EmbFile(#[from] EmbFileError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Analyze(#[from] DistributionError),
    #[error("{0}")]
    Alignment(String),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Config(_) => "config",
            Error::Data(DataError::Io { .. }) | Error::EmbFile(EmbFileError::Io { .. }) => "io",
            Error::Checkpoint(CheckpointError::Io { .. }) => "io",
            Error::Data(_) => "parse",
            Error::Canon { .. } => "canon",
            Error::Split(_) => "split",
            Error::Sampling(_) => "sampling",
            Error::EmbFile(_) | Error::Embedding(_) => "embedding",
            Error::Fetch(_) => "fetch",
            Error::Checkpoint(_) => "checkpoint",
            Error::Model(_) => "model",
            Error::Train(_) => "train",
            Error::Metrics(_) => "metrics",
            Error::Agreement(_) => "agreement",
            Error::Baseline(_) => "baseline",
            Error::Analyze(_) => "analyze",
            Error::Alignment(_) => "alignment",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "config" => 3,
            "io" => 4,
            "parse" => 5,
            "canon" => 6,
            "split" => 7,
            "sampling" => 8,
            "embedding" => 9,
            "fetch" => 10,
            "checkpoint" => 11,
            "model" => 12,
            "train" => 13,
            "metrics" => 14,
            "agreement" => 15,
            "baseline" => 16,
            "analyze" => 17,
            _ => 18,
        }
    }

    /// `error[category]: message` on one line.
    pub fn line(&self) -> String {
        let message: String = self
            .to_string()
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("error[{}]: {message}", self.category())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
