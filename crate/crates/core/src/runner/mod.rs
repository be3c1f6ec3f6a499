//! Experiment configs, the run pipeline and result manifests.
//!
//! A run loads a dataset and (when any k > 0) a sentence pool, embeds what
//! is missing through the embedding cache, then evaluates every
//! (template, k) cell. Results are written as one JSON manifest per
//! config hash.

mod config;
mod dataset;
mod embed_cache;
mod manifest;
mod report;
mod run;

pub use config::{load_config, parse_override, BackendsConfig, ExperimentConfig, Limits, Task};
pub use dataset::{load_dataset, parse_dataset, DatasetExample};
pub use embed_cache::{
    decode_embedding_cache, encode_embedding_cache, EmbeddingCache, EMBEDDING_CACHE_MAGIC,
    EMBEDDING_CACHE_VERSION,
};
pub use manifest::{
    manifest_file_name, read_report, write_report, CellReport, CellResult, ClassificationDisplay,
    ExampleRecord, RetrievedRef, RougeDisplay, RunManifest, SummaryReport, MANIFEST_VERSION,
};
pub use report::format_report;
pub use run::{
    delta_table, embed_pool, lead_baseline, load_pool_any, run_classification, run_experiment,
    run_summarization, self_predict_pool, self_predicted_pool_path, sweep, RunOptions,
};

use std::path::Path;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::metrics::MetricsError;
use crate::prompt::PromptError;
use crate::vector_store::VectorStoreError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("dataset line {line}: {message}")]
    DatasetSchema { line: usize, message: String },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error("dry run: {0}")]
    DryRun(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    VectorStore(#[from] VectorStoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 3 for backend failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Gateway(
                GatewayError::Transport { .. }
                | GatewayError::Timeout { .. }
                | GatewayError::BackendRejection { .. }
                | GatewayError::MalformedResponse(_),
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;
