//! Reproducible classification pipeline for German customer-feedback text.
//!
//! The crate covers the full path from raw GermEval-style TSV files to
//! significance-annotated comparison tables:
//!
//! * [`corpus`]: TSV ingestion, cleaning, stratified folds, corpus subsampling.
//! * [`normalize`]: the ordered rewrite rules that turn noisy social-media
//!   text into a token stream (URLs, emoticons, handles, numbers, ...).
//! * [`stats`]: unique n-gram counts and mean document lengths.
//! * [`textmodel`]: a bag-of-n-grams linear classifier over hashed features
//!   plus CBOW/skip-gram embedding training with negative sampling.
//! * [`adapt`]: continued embedding pretraining on domain/task text, an MLM
//!   masking collator and vocabulary expansion.
//! * [`metrics`]: micro-averaged precision, recall and F-beta.
//! * [`stattest`]: one-sided Wilcoxon rank-sum (and signed-rank) tests.
//! * [`harness`]: cross-validation, test-set evaluation, a JSONL results
//!   store and baseline comparison tables.

pub mod adapt;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod normalize;
pub mod stats;
pub mod stattest;
pub mod textmodel;

pub use error::{Error, Result};

pub use corpus::{Document, LabeledDataset, Sentiment, SplitName, Task, UnlabeledCorpus};
pub use metrics::EvalReport;
pub use normalize::{CasingMode, RuleSet};
pub use stats::CorpusStats;
pub use textmodel::{EmbeddingTable, SupervisedModel, TrainConfig, Vocabulary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The only random generator used in the crate; every consumer derives
/// it from an explicit seed.
pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
