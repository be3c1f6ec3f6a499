//! On-disk embedding cache, one file per embedding backend.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic     8 bytes  "PARCEMBC"
//! version   u32      currently 1
//! dim       u32
//! count     u64
//! entries   count * (32-byte text key, dim f32), keys ascending
//! checksum  32 bytes SHA-256 over everything above
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Result, RunnerError};
use crate::gateway::{BackendDescriptor, Gateway};
use crate::vector_store::EmbeddingVector;

pub const EMBEDDING_CACHE_MAGIC: &[u8; 8] = b"PARCEMBC";
pub const EMBEDDING_CACHE_VERSION: u32 = 1;

type Key = [u8; 32];

fn corrupt(m: impl Into<String>) -> RunnerError {
    RunnerError::Cache(m.into())
}

pub fn encode_embedding_cache(dim: usize, entries: &BTreeMap<Key, Vec<f32>>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + entries.len() * (32 + dim * 4) + 32);
    out.extend_from_slice(EMBEDDING_CACHE_MAGIC);
    out.extend_from_slice(&EMBEDDING_CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (key, v) in entries {
        out.extend_from_slice(key);
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_embedding_cache(bytes: &[u8]) -> Result<(usize, BTreeMap<Key, Vec<f32>>)> {
    if bytes.len() < 24 + 32 || &bytes[..8] != EMBEDDING_CACHE_MAGIC {
        return Err(corrupt("not an embedding cache"));
    }
    let (body, stored) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != EMBEDDING_CACHE_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(body[16..24].try_into().unwrap());
    if dim == 0 {
        return Err(corrupt("dim is zero"));
    }
    let record = 32 + dim * 4;
    let rest = &body[24..];
    if rest.len() % record != 0 || (rest.len() / record) as u64 != count {
        return Err(corrupt(format!("{} bytes do not hold {count} records", rest.len())));
    }
    let mut entries = BTreeMap::new();
    let mut previous: Option<Key> = None;
    for chunk in rest.chunks_exact(record) {
        let key: Key = chunk[..32].try_into().unwrap();
        if previous.is_some_and(|p| p >= key) {
            return Err(corrupt("keys are not strictly ascending"));
        }
        previous = Some(key);
        let v: Vec<f32> = chunk[32..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.insert(key, v);
    }
    Ok((dim, entries))
}

/// Text-keyed vectors for one backend, loaded from and saved to `dir`.
pub struct EmbeddingCache {
    path: PathBuf,
    dim: usize,
    entries: BTreeMap<Key, Vec<f32>>,
    dirty: bool,
}

fn backend_identity(d: &BackendDescriptor) -> String {
    format!("{}\u{0}{}\u{0}{}", d.endpoint, d.model_name, d.embedding_dim())
}

fn text_key(text: &str) -> Key {
    Sha256::digest(text.as_bytes()).into()
}

impl EmbeddingCache {
    /// Opens the cache file for `descriptor` under `dir`. An unreadable or
    /// corrupt file is discarded with a warning.
    pub fn open(dir: &Path, descriptor: &BackendDescriptor) -> Self {
        let id = hex::encode(Sha256::digest(backend_identity(descriptor).as_bytes()));
        let path = dir.join(format!("emb-{}.bin", &id[..16]));
        let dim = descriptor.embedding_dim();
        let entries = match std::fs::read(&path) {
            Ok(bytes) => match decode_embedding_cache(&bytes) {
                Ok((d, e)) if d == dim => e,
                Ok((d, _)) => {
                    tracing::warn!(path = %path.display(), found = d, dim, "embedding cache has wrong dim, ignoring");
                    BTreeMap::new()
                }
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "ignoring embedding cache");
                    BTreeMap::new()
                }
            },
            Err(_) => BTreeMap::new(),
        };
        EmbeddingCache {
            path,
            dim,
            entries,
            dirty: false,
        }
    }

    /// An in-memory cache that is never saved.
    pub fn ephemeral(descriptor: &BackendDescriptor) -> Self {
        EmbeddingCache {
            path: PathBuf::new(),
            dim: descriptor.embedding_dim(),
            entries: BTreeMap::new(),
            dirty: false,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.contains_key(&text_key(text))
    }

    /// Vectors for `texts` in order. Misses are embedded with `gateway`
    /// (each distinct text once); without a gateway a miss is an error.
    pub fn embed(&mut self, gateway: Option<&Gateway>, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut missing: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in texts {
            let k = text_key(t);
            if !self.entries.contains_key(&k) && seen.insert(k) {
                missing.push(t.clone());
            }
        }
        if !missing.is_empty() {
            let gateway = gateway.ok_or_else(|| {
                RunnerError::DryRun(format!("{} text(s) have no cached embedding", missing.len()))
            })?;
            let vectors = gateway.embed(&missing)?;
            for (t, v) in missing.iter().zip(vectors) {
                self.entries.insert(text_key(t), v.values().to_vec());
            }
            self.dirty = true;
        }
        texts
            .iter()
            .map(|t| {
                let v = self.entries[&text_key(t)].clone();
                if v.len() != self.dim {
                    return Err(RunnerError::Cache(format!("cached vector has dim {}", v.len())));
                }
                Ok(EmbeddingVector::new(v)?)
            })
            .collect()
    }

    /// Writes the file if anything was added.
    pub fn save(&mut self) -> Result<()> {
        if !self.dirty || self.path.as_os_str().is_empty() {
            return Ok(());
        }
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
        }
        let tmp = self.path.with_extension("partial");
        std::fs::write(&tmp, encode_embedding_cache(self.dim, &self.entries))
            .map_err(|e| RunnerError::io(&tmp, e))?;
        std::fs::rename(&tmp, &self.path).map_err(|e| RunnerError::io(&self.path, e))?;
        self.dirty = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendKind;

    fn descriptor() -> BackendDescriptor {
        let mut d = BackendDescriptor::mock(BackendKind::Embedding, 3);
        d.dim = Some(8);
        d
    }

    #[test]
    fn round_trip_and_corruption() {
        let mut m = BTreeMap::new();
        m.insert([1u8; 32], vec![0.5f32; 4]);
        m.insert([0u8; 32], vec![-1.0f32; 4]);
        let bytes = encode_embedding_cache(4, &m);
        assert_eq!(decode_embedding_cache(&bytes).unwrap(), (4, m));
        let mut bad = bytes.clone();
        bad[30] ^= 1;
        assert!(decode_embedding_cache(&bad).is_err());
        assert!(decode_embedding_cache(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_embedding_cache(b"PARCEMBC").is_err());
    }

    #[test]
    fn warm_equals_cold() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gateway::connect(descriptor()).unwrap();
        let texts: Vec<String> = ["a", "b c", "a"].map(String::from).to_vec();
        let mut cold = EmbeddingCache::open(dir.path(), &descriptor());
        let v1 = cold.embed(Some(&g), &texts).unwrap();
        assert_eq!(cold.len(), 2);
        cold.save().unwrap();
        let mut warm = EmbeddingCache::open(dir.path(), &descriptor());
        assert_eq!(warm.len(), 2);
        let v2 = warm.embed(None, &texts).unwrap();
        assert_eq!(v1, v2);
        assert!(matches!(warm.embed(None, &["new".into()]), Err(RunnerError::DryRun(_))));
    }
}
