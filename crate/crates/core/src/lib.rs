//! Cross-lingual retrieval-augmented in-context learning.
//!
//! A low-resource-language query is embedded, the most similar
//! high-resource-language examples are retrieved from a sentence pool, and
//! a prompt built from those demonstrations is sent to a generative or
//! masked language-model backend. The crate also scores the outcome
//! (classification reports, ROUGE, LEAD-n) and drives whole experiments
//! from declarative configs.

pub mod text;
pub mod vector_store;
pub mod gateway;
pub mod prompt;
pub mod metrics;
pub mod runner;
