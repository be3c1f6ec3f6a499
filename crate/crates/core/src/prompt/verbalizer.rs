use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{PromptError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbalizerEntry {
    pub label: String,
    pub word: String,
}

/// Injective label → answer-word map used for masked prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VerbalizerEntry>", into = "Vec<VerbalizerEntry>")]
pub struct Verbalizer {
    entries: Vec<VerbalizerEntry>,
}

impl Verbalizer {
    pub fn new(entries: Vec<VerbalizerEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(PromptError::InvalidVerbalizer("no entries".into()));
        }
        let mut labels = HashSet::new();
        let mut words = HashSet::new();
        for e in &entries {
            if e.word.trim().is_empty() || e.word.split_whitespace().count() != 1 {
                return Err(PromptError::InvalidVerbalizer(format!(
                    "answer for {:?} must be a single word, got {:?}",
                    e.label, e.word
                )));
            }
            if !labels.insert(e.label.as_str()) {
                return Err(PromptError::InvalidVerbalizer(format!(
                    "label {:?} mapped twice",
                    e.label
                )));
            }
            if !words.insert(e.word.as_str()) {
                return Err(PromptError::InvalidVerbalizer(format!(
                    "word {:?} used for two labels",
                    e.word
                )));
            }
        }
        Ok(Verbalizer { entries })
    }

    /// Convenience constructor from `(label, word)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, word)| VerbalizerEntry {
                    label: label.into(),
                    word: word.into(),
                })
                .collect(),
        )
    }

    pub fn apply(&self, label: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map(|e| e.word.as_str())
            .ok_or_else(|| PromptError::VerbalizerMiss(label.to_string()))
    }

    pub fn invert(&self, word: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|e| e.word == word)
            .map(|e| e.label.as_str())
            .ok_or_else(|| PromptError::VerbalizerMiss(word.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// Answer words in mapping order; the candidate list for mask filling.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    /// True when every label in `labels` has a word.
    pub fn covers<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> bool {
        labels.into_iter().all(|l| self.apply(l).is_ok())
    }
}

impl TryFrom<Vec<VerbalizerEntry>> for Verbalizer {
    type Error = PromptError;

    fn try_from(entries: Vec<VerbalizerEntry>) -> Result<Self> {
        Verbalizer::new(entries)
    }
}

impl From<Verbalizer> for Vec<VerbalizerEntry> {
    fn from(v: Verbalizer) -> Self {
        v.entries
    }
}
