//! Order-k Markov chain language models.
//!
//! The crate covers the whole pipeline: tokenizing a corpus ([`corpus`]),
//! counting k-grams ([`ngram`]), smoothing the resulting estimates
//! ([`smoothing`]), sampling text ([`generate`]) and measuring how much of
//! the output is copied from the training data ([`analyze`]). [`chain`]
//! holds the general order-k chain over a named state set, and
//! [`model_file`] the text format both kinds of model are stored in.

pub mod analyze;
pub mod chain;
pub mod corpus;
pub mod dist;
pub mod error;
pub mod generate;
pub mod model_file;
pub mod ngram;
pub mod rng;
pub mod smoothing;

pub use chain::TransitionTable;
pub use corpus::{TokenizerConfig, Vocabulary};
pub use dist::Distribution;
pub use error::{Error, Result};
pub use ngram::{count_kgrams, ContinuationTable, KGramIndex};
pub use analyze::{AnalysisReport, Perplexity, SuffixIndex};
pub use generate::{GenerationConfig, GenerationResult, Generator};
pub use smoothing::{Estimator, ModelStack, SmoothingConfig};
pub use model_file::{ModelFile, NgramModel};
