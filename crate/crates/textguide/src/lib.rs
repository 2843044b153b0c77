//! Importance-guided truncation of long labeled texts to a fixed token
//! budget, with naive baselines and a cross-validated evaluation harness.
//!
//! The pipeline has two phases. Phase 1 learns which tokens matter: a
//! bag-of-words model over the corpus, mutual-information selection of the
//! top N token features, a boosted-trees classifier over those features, and
//! a ranking of tokens by the classifier's gain-based importances (the
//! sITFL). Phase 2 rebuilds each over-long instance inside the token budget
//! (NTA): a slice from the head, a slice from the tail, and the middle
//! filled with small windows around the most important tokens found in the
//! instance.
//!
//! The `evaluation` module measures how much class signal each truncation
//! strategy retains, using stratified k-fold cross validation, a BoW +
//! boosting proxy classifier, and the multiclass Matthews correlation
//! coefficient.
//!
//! Corpus-wide operations (truncation, sweep grid points) are data-parallel
//! via rayon when the default `parallel` feature is enabled; disabling it
//! falls back to sequential execution with identical results.

pub mod boost;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod importance;
pub mod seed;
pub mod truncation;

pub use error::{Error, Result};
