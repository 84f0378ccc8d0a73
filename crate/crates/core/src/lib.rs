//! Transfer-language ranking for cross-lingual NLP.
//!
//! Given a task language and a pool of candidate transfer languages, the
//! crate extracts corpus statistics and typological distances for every
//! pair, trains a gradient-boosted tree ranker with LambdaRank gradients, and
//! evaluates it with leave-one-language-out cross validation.
//!
//! The modules follow the data flow:
//!
//! - [`corpus`] and [`bpe`]: tokenized corpora and subword vocabularies.
//! - [`features`]: dataset-dependent pair features and task profiles.
//! - [`typology`]: typological vectors and precomputed distance tables.
//! - [`dataset`]: feature rows, gold scores and ranking groups.
//! - [`ranker`]: relevance labels, NDCG, LambdaRank, trees and the ensemble.
//! - [`evaluation`]: leave-one-out protocol, baselines and top-K curves.
//! - [`cli`]: the command-line front end.

pub mod bpe;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ranker;
pub mod typology;

pub use error::{Error, Result};
