//! Deterministic in-process backend addressed as `mock:<seed>`.
//!
//! Every output is a pure function of the seed and the request:
//!
//! * generation: when the prompt has more than one block, the last line of
//!   the first block (the answer of the best demonstration); otherwise a
//!   hash-chosen span of at most `max_new_tokens` words of the prompt.
//! * fill_mask: a candidate scores the number of times it occurs as a token
//!   in the prompt, minus a hash-derived fraction in `[0, 0.5)`.
//! * embedding: signed feature hashing of the tokens into `dim` buckets.

use sha2::{Digest, Sha256};

use super::protocol::{BackendRequest, BackendResponse};
use super::transport::{Transport, TransportFailure};
use super::BackendKind;
use crate::prompt::BLOCK_SEPARATOR;
use crate::text::tokenize;

#[derive(Debug, Clone)]
pub struct MockTransport {
    seed: u64,
    dim: usize,
}

/// SHA-256 of the seed and the parts, each part length-prefixed; the first
/// eight digest bytes as a little-endian integer.
pub fn mock_hash(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn unit_fraction(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl MockTransport {
    pub fn new(seed: u64, dim: usize) -> Self {
        MockTransport { seed, dim }
    }

    pub fn generate(&self, prompt: &str, max_new_tokens: u32) -> String {
        let blocks: Vec<&str> = prompt.split(BLOCK_SEPARATOR).collect();
        if blocks.len() > 1 {
            if let Some(line) = blocks[0].lines().last() {
                return line.to_string();
            }
        }
        let words: Vec<&str> = prompt.split_whitespace().collect();
        if words.is_empty() {
            return String::new();
        }
        let h = mock_hash(self.seed, &["generation", prompt]);
        let cap = words.len().min(max_new_tokens.max(1) as usize);
        let len = 1 + (h % cap as u64) as usize;
        let start = ((h >> 32) % (words.len() - len + 1) as u64) as usize;
        words[start..start + len].join(" ")
    }

    pub fn score(&self, prompt: &str, candidate: &str) -> f64 {
        let tokens = tokenize(prompt);
        let target = tokenize(candidate);
        let count = match target.as_slice() {
            [word] => tokens.iter().filter(|t| *t == word).count(),
            _ => 0,
        };
        count as f64 - 0.5 * unit_fraction(mock_hash(self.seed, &["fill_mask", prompt, candidate]))
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0f32; self.dim];
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            tokens.push(text.to_string());
        }
        for t in &tokens {
            let h = mock_hash(self.seed, &["embedding", t]);
            let bucket = (h % self.dim as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        if v.iter().all(|x| *x == 0.0) {
            // Opposite-signed collisions cancelled out.
            v[(mock_hash(self.seed, &["embedding-fallback", text]) % self.dim as u64) as usize] = 1.0;
        }
        v
    }
}

impl Transport for MockTransport {
    fn send(&self, request: &BackendRequest) -> Result<BackendResponse, TransportFailure> {
        let inputs = &request.inputs;
        Ok(match request.kind {
            BackendKind::Generation => {
                let max = request.params.max_new_tokens.unwrap_or(32);
                BackendResponse::outputs(inputs.iter().map(|p| self.generate(p, max)).collect())
            }
            BackendKind::FillMask => BackendResponse::scores(
                inputs
                    .iter()
                    .map(|p| {
                        request
                            .params
                            .candidates
                            .iter()
                            .map(|c| Some(self.score(p, c)))
                            .collect()
                    })
                    .collect(),
            ),
            BackendKind::Embedding => {
                BackendResponse::vectors(inputs.iter().map(|t| self.embed(t)).collect())
            }
        })
    }
}
