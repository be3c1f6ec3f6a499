//! Sentence pool storage and exact top-k cosine retrieval.
//!
//! Pool embeddings are normalized on the way in, so retrieval scores are
//! plain dot products accumulated in `f64`. Retrieval is an exhaustive
//! linear scan; ties are broken by ascending pool index, which makes every
//! result reproducible. Near-duplicate pool entries are not collapsed: two
//! identical sentences both occupy slots in a top-k result.

mod cache;
mod embedding;
mod pool;
mod retrieval;

pub use cache::{decode_pool, encode_pool, load_pool, save_pool, CACHE_MAGIC, CACHE_VERSION};
pub use embedding::{cosine_similarity, dot, normalize, EmbeddingVector, NORM_TOLERANCE};
pub use pool::{
    build_pool, parse_pool_records, read_pool_file, LabelSource, PoolEntry, PoolRecord,
    SentencePool, DEFAULT_DIM,
};
pub use retrieval::{retrieve_top_k, Hit, RetrievalResult};
pub(crate) use pool::label_string;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorStoreError {
    #[error("embedding is the zero vector")]
    ZeroVector,
    #[error("embedding is empty")]
    EmptyVector,
    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pool has no embedded entries")]
    EmptyPool,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate pool id {0:?}")]
    DuplicateId(String),
    #[error("schema error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Schema { line: Option<usize>, message: String },
    #[error("pool cache checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VectorStoreError {
    pub(crate) fn schema(line: Option<usize>, message: impl Into<String>) -> Self {
        VectorStoreError::Schema {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = VectorStoreError> = std::result::Result<T, E>;
