//! Slot filling over a tokenized, entity-tagged corpus.
//!
//! Queries are expanded with aliases, matching documents are retrieved, and
//! query/filler candidates are validated by distantly supervised classifiers,
//! scored intertext patterns and hand-written surface patterns. The responses
//! are merged, scored against gold annotations and tuned per relation.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix the
//! scalar to `f64` (or `f32` where noted).

pub mod alias;
pub mod candidates;
pub mod classifier;
pub mod config;
pub mod distsup;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod model;
pub mod patterns;
pub mod pipeline;
pub mod response;
pub mod retrieval;
pub mod scalar;
pub mod synth;
pub mod text;

pub use error::{Error, Result};

pub type FeatureVector = features::SparseVector<f64>;
pub type FeatureVector32 = features::SparseVector<f32>;
pub type LinearModel = classifier::LinearModel<f64>;
pub type LinearModel32 = classifier::LinearModel<f32>;
pub type TrainingExample = classifier::AggregatedExample<f64>;
pub type PatternRelationModel = patterns::PatternRelationModel<f64>;
pub type ScoredPatternTable = patterns::ScoredPatternTable<f64>;
pub type ScoreReport = evaluation::ScoreReport<f64>;
