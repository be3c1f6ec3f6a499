//! Binary pool cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "PARCPOOL"
//! version    u32       currently 1
//! dim        u32
//! count      u64       number of entries
//! meta_len   u64       byte length of the metadata block
//! metadata   meta_len  JSON array, one object per entry:
//!                      {id, text, label, label_source, embedded}
//! vectors    n*dim*4   f32 components of every entry with embedded=true,
//!                      in entry order, contiguous
//! checksum   32 bytes  SHA-256 over everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::embedding::EmbeddingVector;
use super::pool::{LabelSource, PoolEntry, SentencePool};
use super::{Result, VectorStoreError};

pub const CACHE_MAGIC: &[u8; 8] = b"PARCPOOL";
pub const CACHE_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;
const CHECKSUM_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryMeta {
    id: String,
    text: String,
    label: Option<String>,
    label_source: LabelSource,
    embedded: bool,
}

pub(crate) fn encode_body(pool: &SentencePool) -> Vec<u8> {
    let meta: Vec<EntryMeta> = pool
        .entries()
        .iter()
        .map(|e| EntryMeta {
            id: e.id.clone(),
            text: e.text.clone(),
            label: e.label.clone(),
            label_source: e.label_source,
            embedded: e.embedding.is_some(),
        })
        .collect();
    let meta_json = serde_json::to_vec(&meta).expect("pool metadata serializes");
    let vector_bytes = pool.embedded_count() * pool.dim() * 4;

    let mut out = Vec::with_capacity(HEADER_LEN + meta_json.len() + vector_bytes + CHECKSUM_LEN);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(pool.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(pool.len() as u64).to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_json);
    for embedding in pool.entries().iter().filter_map(|e| e.embedding.as_ref()) {
        for v in embedding.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Serializes a pool into the cache container.
pub fn encode_pool(pool: &SentencePool) -> Vec<u8> {
    let mut out = encode_body(pool);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| VectorStoreError::schema(None, "pool cache is truncated"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?)
            .map_err(|_| VectorStoreError::schema(None, "length does not fit in memory"))
    }
}

/// Parses and verifies a cache container.
pub fn decode_pool(bytes: &[u8]) -> Result<SentencePool> {
    if bytes.len() < 8 || &bytes[..8] != CACHE_MAGIC {
        return Err(VectorStoreError::schema(None, "not a pool cache (bad magic)"));
    }
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(VectorStoreError::schema(None, "pool cache is truncated"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(VectorStoreError::schema(
            None,
            format!("unsupported pool cache version {version}"),
        ));
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(VectorStoreError::ChecksumMismatch);
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let dim = r.u32()? as usize;
    let count = r.len()?;
    let meta_len = r.len()?;
    let meta: Vec<EntryMeta> = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| VectorStoreError::schema(None, format!("pool metadata: {e}")))?;
    if meta.len() != count {
        return Err(VectorStoreError::schema(
            None,
            format!("header says {count} entries, metadata has {}", meta.len()),
        ));
    }
    let embedded = meta.iter().filter(|m| m.embedded).count();
    let expected = embedded
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| VectorStoreError::schema(None, "vector block size overflows"))?;
    if body.len() - r.pos != expected {
        return Err(VectorStoreError::schema(
            None,
            format!("vector block is {} bytes, expected {expected}", body.len() - r.pos),
        ));
    }

    let mut entries = Vec::with_capacity(count);
    for m in meta {
        let embedding = if m.embedded {
            let raw = r.take(dim * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Some(EmbeddingVector::new(values)?)
        } else {
            None
        };
        entries.push(PoolEntry {
            id: m.id,
            text: m.text,
            label: m.label,
            embedding,
            label_source: m.label_source,
        });
    }
    SentencePool::from_entries(entries, dim)
}

pub fn save_pool(pool: &SentencePool, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, encode_pool(pool))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_pool(path: &Path) -> Result<SentencePool> {
    decode_pool(&std::fs::read(path)?)
}
