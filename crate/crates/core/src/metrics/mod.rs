//! Classification reports, ROUGE, the LEAD-n baseline and zero-shot delta
//! tables.

mod classification;
mod lead;
mod rouge;
mod table;

pub use classification::{
    classification_report, confusion_matrix, Averages, ClassMetrics, ClassificationReport,
    ConfusionMatrix,
};
pub use lead::{lead_n, LEAD_TOKENS};
pub use rouge::{
    lcs_length, rouge_lsum_tokens, rouge_n_tokens, rouge_scores, rouge_tokens, RougeScore,
    RougeScores,
};
pub use table::{display_2dp, f1_table, Average, DeltaRow, DeltaTable, F1Row, F1Table};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{gold} gold labels but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to score")]
    Empty,
    #[error("gold label {0:?} is not in the label set")]
    UnknownGoldLabel(String),
    #[error("label set is empty or has duplicates")]
    InvalidLabelSet,
    #[error("confusion matrix has no scored examples")]
    EmptyMatrix,
    #[error("reports do not share a label set")]
    LabelSetMismatch,
    #[error("reference has no tokens")]
    EmptyReference,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;
