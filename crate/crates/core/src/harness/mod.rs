//! Experiment orchestration: CV, test-set runs, a JSONL results store and
//! comparison tables rendered from stored records only.

mod run;
mod store;

pub use run::{
    base_provenance, compare_to_baseline, corpus_hash, dataset_hash, mean_std, render_test_table, run_cv,
    run_test_eval, sha256_hex, CVReport, Comparison, ComparisonRow, CvOutcome, ExperimentConfig, TestOutcome,
    MICRO_F1,
};
pub use store::{fold_scores, latest_value, ResultRecord, ResultStore, CONFIG_HASH_KEY};
