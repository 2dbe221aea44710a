//! Embedding-level domain and task adaptation, plus the masking collator
//! and vocabulary expansion used by masked-language-model pretraining.

mod expand;
mod masking;
mod plan;

pub use expand::{expand_vocab, DEFAULT_MAX_NEW};
pub use masking::{mlm_mask, MaskTally, MaskedBatch, MaskingConfig, IGNORE};
pub use plan::{
    continue_pretraining, adaptation_matrix, whole_pipeline_adapt_then_finetune, AdaptInputs, AdaptPlan,
    AdaptProvenance, AdaptSource, PipelineOutcome,
};
