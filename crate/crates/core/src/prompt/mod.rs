//! Prompt templates, verbalizers and retrieval-augmented prompt assembly.
//!
//! A prompt is a sequence of blocks separated by one blank line: the
//! demonstrations in retrieval order, then the query. A demonstration is the
//! template filled with the pool text plus its answer; the query block is the
//! zero-shot rendering, so an empty retrieval degenerates to zero-shot
//! byte for byte.
//!
//! For masked templates every demonstration has its mask marker replaced by
//! the verbalizer word, leaving the query's marker as the only one in the
//! prompt.

mod assemble;
mod registry;
mod template;
mod verbalizer;

pub use assemble::{
    assemble_prompt, render_demonstration, render_zero_shot, AssembledPrompt, QueryExample,
    TaskMeta, BLOCK_SEPARATOR,
};
pub use registry::{TemplateRegistry, BUILTIN_PREFIX, BUILTIN_REGISTRIES};
pub use template::{
    PromptTemplate, TemplateSpec, TemplateStyle, DEFAULT_MASK_TOKEN, TARGET_LANG_SLOT, TEXT_SLOT,
};
pub use verbalizer::{Verbalizer, VerbalizerEntry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {id:?} is invalid: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("invalid verbalizer: {0}")]
    InvalidVerbalizer(String),
    #[error("template needs a value for {{{0}}}")]
    MissingSlotValue(&'static str),
    #[error("query {0:?} has empty text")]
    EmptyQuery(String),
    #[error("pool entry {0:?} has no label")]
    UnlabeledEntry(String),
    #[error("verbalizer has no mapping for {0:?}")]
    VerbalizerMiss(String),
    #[error("masked template {0:?} has no verbalizer")]
    MissingVerbalizer(String),
    #[error("label {label:?} is not an option of template {template:?}")]
    UnknownLabel { label: String, template: String },
    #[error("retrieved id {0:?} is not in the pool")]
    DanglingHitId(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("duplicate template id {0:?}")]
    DuplicateTemplateId(String),
    #[error("registry schema error: {0}")]
    Schema(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = PromptError> = std::result::Result<T, E>;
