//! Coreference corpora to extractive QA, and the tooling around it.
//!
//! The crate is organised along the pipeline:
//!
//! - [`conll`]: CoNLL-2012 column files into [`conll::Document`]s and back.
//! - [`convert`]: coreference clusters into QA pairs (declarative queries,
//!   rule-based questions, or an external question generator).
//! - [`dataset`]: SQuAD-schema datasets, merging, splitting, statistics and
//!   MultiRC conversion.
//! - [`metrics`]: answer normalisation, token F1 / exact match, subset deltas.
//! - [`probes`]: dataset artifact probes, transforms and bias reports.
//! - [`curation`]: passage ranking and guideline validation for drafting new
//!   coreference questions.

pub mod conll;
pub mod convert;
pub mod curation;
pub mod dataset;
pub mod http;
pub mod lexicon;
pub mod metrics;
pub mod probes;
pub mod text;

pub use conll::{ColumnMap, Document};
pub use dataset::{Answer, QADataset, QAExample};
pub use lexicon::Lexicon;
