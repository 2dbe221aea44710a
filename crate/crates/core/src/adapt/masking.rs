//! Masked-language-model corruption of token id sequences.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;

/// Label value at positions that were not selected.
pub const IGNORE: i64 = -100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub mask_prob: f64,
    pub mask_token_id: u32,
    /// Ids never selected and never used as random replacements.
    pub special_token_ids: BTreeSet<u32>,
    /// Size of the id space; random replacements are drawn from
    /// `0..vocab_size` minus special ids and the mask id.
    pub vocab_size: u32,
    /// Fractions of selected positions that become the mask token, a
    /// random token, or stay unchanged.
    pub proportions: (f64, f64, f64),
    pub seed: u64,
}

impl MaskingConfig {
    pub fn new(mask_prob: f64, mask_token_id: u32, vocab_size: u32, seed: u64) -> Self {
        MaskingConfig {
            mask_prob,
            mask_token_id,
            special_token_ids: BTreeSet::from([mask_token_id]),
            vocab_size,
            proportions: (0.8, 0.1, 0.1),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::invalid(format!("mask_prob {} outside [0, 1]", self.mask_prob)));
        }
        let (m, r, k) = self.proportions;
        if [m, r, k].iter().any(|p| !(0.0..=1.0).contains(p)) || ((m + r + k) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("mask/random/keep proportions must be in [0, 1] and sum to 1"));
        }
        if self.mask_token_id >= self.vocab_size {
            return Err(Error::invalid("mask token id outside the vocabulary"));
        }
        Ok(())
    }

    fn replacement_pool(&self) -> Vec<u32> {
        (0..self.vocab_size)
            .filter(|id| *id != self.mask_token_id && !self.special_token_ids.contains(id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedBatch {
    pub input_ids: Vec<Vec<u32>>,
    /// Original id where selected, [`IGNORE`] elsewhere.
    pub labels: Vec<Vec<i64>>,
    pub selection_mask: Vec<Vec<bool>>,
}

impl MaskedBatch {
    /// Counts of (selected, replaced by mask, replaced by random, kept)
    /// over non-special positions, plus the number of eligible positions.
    pub fn tally(&self, original: &[Vec<u32>], config: &MaskingConfig) -> MaskTally {
        let mut t = MaskTally::default();
        for ((orig, inp), sel) in original.iter().zip(&self.input_ids).zip(&self.selection_mask) {
            for ((&o, &i), &s) in orig.iter().zip(inp).zip(sel) {
                if config.special_token_ids.contains(&o) {
                    continue;
                }
                t.eligible += 1;
                if !s {
                    continue;
                }
                t.selected += 1;
                if i == config.mask_token_id {
                    t.masked += 1;
                } else if i == o {
                    t.kept += 1;
                } else {
                    t.random += 1;
                }
            }
        }
        t
    }
}

/// A random replacement that happens to equal the original id is counted
/// as kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskTally {
    pub eligible: usize,
    pub selected: usize,
    pub masked: usize,
    pub random: usize,
    pub kept: usize,
}

/// Selects each non-special position with probability `mask_prob`, then
/// corrupts it per `proportions`. Pure given `config.seed`.
pub fn mlm_mask(sequences: &[Vec<u32>], config: &MaskingConfig) -> Result<MaskedBatch> {
    config.validate()?;
    if let Some(bad) = sequences.iter().flatten().find(|&&id| id >= config.vocab_size) {
        return Err(Error::invalid(format!("token id {bad} outside vocabulary of {}", config.vocab_size)));
    }
    let pool = config.replacement_pool();
    if pool.is_empty() && config.proportions.1 > 0.0 && config.mask_prob > 0.0 {
        return Err(Error::invalid("no non-special ids available for random replacement"));
    }
    let (p_mask, p_random, _) = config.proportions;
    let mut rng = seeded_rng(config.seed);
    let mut batch = MaskedBatch {
        input_ids: Vec::with_capacity(sequences.len()),
        labels: Vec::with_capacity(sequences.len()),
        selection_mask: Vec::with_capacity(sequences.len()),
    };
    for seq in sequences {
        let mut ids = seq.clone();
        let mut labels = vec![IGNORE; seq.len()];
        let mut selected = vec![false; seq.len()];
        for (pos, &id) in seq.iter().enumerate() {
            if config.special_token_ids.contains(&id) || rng.random::<f64>() >= config.mask_prob {
                continue;
            }
            selected[pos] = true;
            labels[pos] = i64::from(id);
            let u: f64 = rng.random();
            if u < p_mask {
                ids[pos] = config.mask_token_id;
            } else if u < p_mask + p_random {
                ids[pos] = pool[rng.random_range(0..pool.len())];
            }
        }
        batch.input_ids.push(ids);
        batch.labels.push(labels);
        batch.selection_mask.push(selected);
    }
    Ok(batch)
}
