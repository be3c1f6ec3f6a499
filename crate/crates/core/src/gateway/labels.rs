use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Trim, lowercase and collapse internal whitespace runs to one space.
pub fn normalize_answer(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A task label together with the surface strings a model may emit for it.
/// The first surface string is the one shown in demonstrations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelOption {
    pub label: String,
    pub surface: Vec<String>,
}

/// Ordered label set with surface options, lowercase-unique across labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LabelOption>", into = "Vec<LabelOption>")]
pub struct LabelOptionSet {
    options: Vec<LabelOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelOptionError {
    #[error("label option set is empty")]
    Empty,
    #[error("label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("label {0:?} has no surface options")]
    NoSurface(String),
    #[error("surface option {0:?} is empty after normalization")]
    BlankSurface(String),
    #[error("surface option {0:?} is used more than once")]
    DuplicateSurface(String),
}

impl LabelOptionSet {
    pub fn new(options: Vec<LabelOption>) -> Result<Self, LabelOptionError> {
        if options.is_empty() {
            return Err(LabelOptionError::Empty);
        }
        let mut labels = HashSet::new();
        let mut surfaces = HashSet::new();
        for option in &options {
            if !labels.insert(option.label.as_str()) {
                return Err(LabelOptionError::DuplicateLabel(option.label.clone()));
            }
            if option.surface.is_empty() {
                return Err(LabelOptionError::NoSurface(option.label.clone()));
            }
            for surface in &option.surface {
                let norm = normalize_answer(surface);
                if norm.is_empty() {
                    return Err(LabelOptionError::BlankSurface(surface.clone()));
                }
                if !surfaces.insert(norm) {
                    return Err(LabelOptionError::DuplicateSurface(surface.clone()));
                }
            }
        }
        Ok(LabelOptionSet { options })
    }

    /// Builds a set where each label's only surface form is the label itself.
    pub fn from_labels<I, S>(labels: I) -> Result<Self, LabelOptionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(
            labels
                .into_iter()
                .map(|l| {
                    let label = l.into();
                    LabelOption {
                        surface: vec![label.clone()],
                        label,
                    }
                })
                .collect(),
        )
    }

    pub fn options(&self) -> &[LabelOption] {
        &self.options
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.label.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.options.iter().any(|o| o.label == label)
    }

    /// The surface form shown for `label` in a demonstration.
    pub fn display(&self, label: &str) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.surface[0].as_str())
    }
}

impl TryFrom<Vec<LabelOption>> for LabelOptionSet {
    type Error = LabelOptionError;

    fn try_from(options: Vec<LabelOption>) -> Result<Self, Self::Error> {
        LabelOptionSet::new(options)
    }
}

impl From<LabelOptionSet> for Vec<LabelOption> {
    fn from(set: LabelOptionSet) -> Self {
        set.options
    }
}
