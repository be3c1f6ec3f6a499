use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::embedding::{normalize, EmbeddingVector};
use super::{Result, VectorStoreError};

/// Dimension of the default multilingual sentence encoder.
pub const DEFAULT_DIM: usize = 768;

/// Where a pool entry's label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Corpus,
    SelfPredicted,
    #[default]
    None,
}

/// One high-resource-language document in the retrieval pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
    pub embedding: Option<EmbeddingVector>,
    pub label_source: LabelSource,
}

impl PoolEntry {
    pub fn is_labeled(&self) -> bool {
        self.label.is_some() && self.label_source != LabelSource::None
    }
}

/// An immutable, validated sentence pool.
#[derive(Debug, Clone)]
pub struct SentencePool {
    entries: Vec<PoolEntry>,
    dim: usize,
    by_id: HashMap<String, usize>,
}

impl PartialEq for SentencePool {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries == other.entries
    }
}

impl SentencePool {
    /// Validates entries and normalizes any embeddings that are not unit-norm.
    pub fn from_entries(entries: Vec<PoolEntry>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(VectorStoreError::schema(None, "dim must be positive"));
        }
        let mut by_id = HashMap::with_capacity(entries.len());
        let mut validated = Vec::with_capacity(entries.len());
        for (index, mut entry) in entries.into_iter().enumerate() {
            if entry.text.is_empty() {
                return Err(VectorStoreError::schema(
                    None,
                    format!("entry {:?} has empty text", entry.id),
                ));
            }
            match entry.label_source {
                LabelSource::Corpus | LabelSource::SelfPredicted if entry.label.is_none() => {
                    return Err(VectorStoreError::schema(
                        None,
                        format!("entry {:?} has a label source but no label", entry.id),
                    ));
                }
                _ => {}
            }
            if let Some(embedding) = entry.embedding.take() {
                if embedding.dim() != dim {
                    return Err(VectorStoreError::DimensionMismatch {
                        expected: dim,
                        found: embedding.dim(),
                    });
                }
                entry.embedding = Some(if embedding.is_normalized() {
                    embedding
                } else {
                    normalize(&embedding)?
                });
            }
            if by_id.insert(entry.id.clone(), index).is_some() {
                return Err(VectorStoreError::DuplicateId(entry.id));
            }
            validated.push(entry);
        }
        Ok(SentencePool {
            entries: validated,
            dim,
            by_id,
        })
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<PoolEntry> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of documents, embedded or not.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn embedded_count(&self) -> usize {
        self.entries.iter().filter(|e| e.embedding.is_some()).count()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&PoolEntry> {
        self.position(id).map(|i| &self.entries[i])
    }

    /// Hex SHA-256 of the pool's cache encoding.
    pub fn checksum(&self) -> String {
        let body = super::cache::encode_body(self);
        hex::encode(Sha256::digest(&body))
    }
}

/// One parsed line of a pool file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PoolRecord {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    /// Summarization pools may name the answer `summary`.
    #[serde(default, alias = "summary", deserialize_with = "label_string")]
    pub label: Option<String>,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
    /// Zero-based physical line number, used for generated ids and errors.
    #[serde(skip)]
    pub line: usize,
}

/// Labels may be given as strings or integers (`0`, `1`, `2`).
pub(crate) fn label_string<'de, D>(deserializer: D) -> std::result::Result<Option<String>, D::Error>
where
    D: Deserializer<'de>,
{
    use serde::de::Error;
    let value = Option::<serde_json::Value>::deserialize(deserializer)?;
    match value {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s)),
        Some(serde_json::Value::Number(n)) if n.is_i64() || n.is_u64() => Ok(Some(n.to_string())),
        Some(serde_json::Value::Bool(b)) => Ok(Some(b.to_string())),
        Some(other) => Err(D::Error::custom(format!(
            "label must be a string or integer, got {other}"
        ))),
    }
}

/// Parses line-delimited JSON pool records. Blank lines are skipped but
/// still count towards line numbering.
pub fn parse_pool_records<R: BufRead>(reader: R) -> Result<Vec<PoolRecord>> {
    let mut records = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: PoolRecord = serde_json::from_str(&line)
            .map_err(|e| VectorStoreError::schema(Some(line_no + 1), e.to_string()))?;
        record.line = line_no;
        records.push(record);
    }
    Ok(records)
}

/// Reads and parses a pool file from disk.
pub fn read_pool_file(path: &Path) -> Result<Vec<PoolRecord>> {
    let file = std::fs::File::open(path)?;
    parse_pool_records(std::io::BufReader::new(file))
}

/// Validates raw records into a pool. Records without embeddings are kept
/// but are invisible to retrieval until embedded.
pub fn build_pool(records: Vec<PoolRecord>, dim: usize) -> Result<SentencePool> {
    let mut entries = Vec::with_capacity(records.len());
    for record in records {
        let line = Some(record.line + 1);
        let text = match record.text {
            Some(t) if !t.is_empty() => t,
            Some(_) => return Err(VectorStoreError::schema(line, "`text` is empty")),
            None => return Err(VectorStoreError::schema(line, "missing `text` field")),
        };
        let embedding = match record.embedding {
            Some(values) => {
                if values.len() != dim {
                    return Err(VectorStoreError::DimensionMismatch {
                        expected: dim,
                        found: values.len(),
                    });
                }
                Some(EmbeddingVector::from_f64(&values)?)
            }
            None => None,
        };
        let label_source = if record.label.is_some() {
            LabelSource::Corpus
        } else {
            LabelSource::None
        };
        entries.push(PoolEntry {
            id: record.id.unwrap_or_else(|| format!("{:06}", record.line)),
            text,
            label: record.label,
            embedding,
            label_source,
        });
    }
    SentencePool::from_entries(entries, dim)
}
