use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::embedding::{dot, normalize, EmbeddingVector};
use super::pool::SentencePool;
use super::{Result, VectorStoreError};

/// One retrieved pool entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    /// Position of the entry in the pool.
    pub index: usize,
    pub similarity: f64,
}

/// Ranked retrieval output, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub k: usize,
    pub hits: Vec<Hit>,
    /// Set when fewer than `k` embedded entries were available.
    pub truncated: bool,
}

impl RetrievalResult {
    /// The zero-shot case: no demonstrations.
    pub fn empty() -> Self {
        RetrievalResult {
            k: 0,
            hits: Vec::new(),
            truncated: false,
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.id.as_str())
    }
}

/// Ranking key: higher score first, then lower pool index.
#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f64,
    index: usize,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    /// `Greater` means ranked better.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Exact top-k cosine retrieval by linear scan over embedded entries.
pub fn retrieve_top_k(
    query: &EmbeddingVector,
    pool: &SentencePool,
    k: usize,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(VectorStoreError::InvalidK);
    }
    if query.dim() != pool.dim() {
        return Err(VectorStoreError::DimensionMismatch {
            expected: pool.dim(),
            found: query.dim(),
        });
    }
    let available = pool.embedded_count();
    if available == 0 {
        return Err(VectorStoreError::EmptyPool);
    }
    let query = if query.is_normalized() {
        query.clone()
    } else {
        normalize(query)?
    };

    // Min-heap of the best `k` seen so far; the root is the weakest keeper.
    let keep = k.min(available);
    let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(keep + 1);
    for (index, entry) in pool.entries().iter().enumerate() {
        let Some(embedding) = &entry.embedding else {
            continue;
        };
        // `+ 0.0` folds -0.0 into 0.0 so ties compare equal.
        let score = dot(query.values(), embedding.values()).clamp(-1.0, 1.0) + 0.0;
        let candidate = Scored { score, index };
        if heap.len() < keep {
            heap.push(Reverse(candidate));
        } else if let Some(Reverse(worst)) = heap.peek() {
            if candidate > *worst {
                heap.pop();
                heap.push(Reverse(candidate));
            }
        }
    }

    let mut ranked: Vec<Scored> = heap.into_iter().map(|Reverse(s)| s).collect();
    ranked.sort_unstable_by(|a, b| b.cmp(a));
    let entries = pool.entries();
    let hits = ranked
        .into_iter()
        .map(|s| Hit {
            id: entries[s.index].id.clone(),
            index: s.index,
            similarity: s.score,
        })
        .collect();
    Ok(RetrievalResult {
        k,
        hits,
        truncated: k > available,
    })
}
