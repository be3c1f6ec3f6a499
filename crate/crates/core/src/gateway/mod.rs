//! Access to language-model backends: text generation, mask filling and
//! embedding, over a small JSON protocol (see `docs/protocol.md`) or a
//! deterministic in-process mock.

mod client;
mod descriptor;
mod labels;
mod mapping;
pub mod mock;
pub mod protocol;
mod self_predict;
pub mod stub;
mod transport;

pub use client::{best_candidate, CandidateScore, Gateway};
pub use descriptor::{BackendDescriptor, BackendKind, DecodeParams, Endpoint};
pub use labels::{normalize_answer, LabelOption, LabelOptionError, LabelOptionSet};
pub use mapping::{
    map_generation_to_label, map_scores_to_label, match_label, ParseStatus, Prediction, Predictor,
    RawOutput,
};
pub use self_predict::self_predict_labels;
pub use transport::{HttpTransport, Transport, TransportFailure};

use thiserror::Error;

use crate::prompt::PromptError;
use crate::vector_store::VectorStoreError;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid backend descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("{expected} operation on a {actual} backend")]
    WrongKind {
        expected: BackendKind,
        actual: BackendKind,
    },
    #[error("transport failed after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend rejected the request{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    BackendRejection { status: Option<u16>, message: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("prompt must contain {mask_token} exactly once, found {found}")]
    NoMaskMarker { mask_token: String, found: usize },
    #[error("no candidates to score")]
    EmptyCandidates,
    #[error("no texts to embed")]
    EmptyInput,
    #[error("backend returned {found}-dim vectors, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Vector(#[from] VectorStoreError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl GatewayError {
    /// Failures of the connection layer, as opposed to bad inputs or
    /// responses.
    pub fn is_transport(&self) -> bool {
        matches!(self, GatewayError::Transport { .. } | GatewayError::Timeout { .. })
    }
}

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;
