use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::config::Task;
use super::{Result, RunnerError};
use crate::prompt::QueryExample;
use crate::text::tokenize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
    #[serde(default, deserialize_with = "crate::vector_store::label_string")]
    label: Option<String>,
    #[serde(default)]
    summary: Option<String>,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
}

/// A query plus an optional precomputed embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetExample {
    pub query: QueryExample,
    pub embedding: Option<Vec<f64>>,
}

/// Parses line-delimited records: `text` plus `label` (classification) or
/// `summary` (summarization), optionally `id` and `embedding`. Missing ids
/// become the zero-padded line number. Blank lines are skipped.
pub fn parse_dataset<R: BufRead>(reader: R, task: Task) -> Result<Vec<DatasetExample>> {
    let mut out = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| RunnerError::Schema(format!("line {}: {e}", line_no + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| RunnerError::DatasetSchema {
            line: line_no + 1,
            message: m,
        };
        let r: DatasetRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        if r.text.is_empty() {
            return Err(at("`text` is empty".into()));
        }
        let id = r.id.unwrap_or_else(|| format!("{line_no:06}"));
        if !ids.insert(id.clone()) {
            return Err(at(format!("duplicate id {id:?}")));
        }
        let mut query = QueryExample::new(id, r.text);
        match task {
            Task::Classification => {
                query.gold_label = Some(r.label.ok_or_else(|| at("missing `label`".into()))?);
            }
            Task::Summarization => {
                let summary = r.summary.ok_or_else(|| at("missing `summary`".into()))?;
                if tokenize(&summary).is_empty() {
                    return Err(at("`summary` has no tokens".into()));
                }
                query.reference_summary = Some(summary);
            }
        }
        out.push(DatasetExample {
            query,
            embedding: r.embedding,
        });
    }
    Ok(out)
}

/// Reads a dataset file and keeps the first `max_examples` examples.
pub fn load_dataset(path: &Path, task: Task, max_examples: Option<usize>) -> Result<Vec<DatasetExample>> {
    let file = std::fs::File::open(path).map_err(|e| RunnerError::io(path, e))?;
    let mut examples = parse_dataset(std::io::BufReader::new(file), task)?;
    if let Some(m) = max_examples {
        examples.truncate(m);
    }
    Ok(examples)
}
