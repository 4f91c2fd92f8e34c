//! Clinical text corpus engineering toolkit.
//!
//! The crate covers the data side of building a domain language model from
//! clinical text:
//!
//! - [`corpus`]: JSONL ingestion, per-source cleaning rules and corpus statistics
//! - [`dedup`]: bag-of-words cosine near-duplicate removal, with an exact
//!   quadratic reference and an index-accelerated implementation
//! - [`anonymize`]: name and date detection, wildcard redaction and verification
//! - [`tokenize`]: frequency-thresholded subword vocabularies, greedy
//!   longest-match tokenization and fertility measurement
//! - [`benchmark`]: code assignment, label selection and iterative multi-label
//!   stratified splits
//! - [`metrics`]: AUROC, precision, recall and F1 for multi-label and token-level tasks
//! - [`hpo`]: random-search hyperparameter optimization with median pruning
//! - [`pipeline`]: the end-to-end ingest → clean → dedup → anonymize → stats
//!   pipeline and pretraining config emitter
//!
//! Runnable walkthroughs live in this crate's `examples/` directory; see
//! `cargo run -p medcorpus --example <name>`.

pub mod anonymize;
pub mod benchmark;
pub mod corpus;
pub mod dedup;
mod error;
pub mod hpo;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod tokenize;

pub use error::{Error, Result};
