//! CBOW / skip-gram embedding training with negative sampling over words
//! and their character n-grams.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use super::supervised::WordVectors;
use super::table::EmbeddingTable;
use super::vocab::{count_words, rank_words, Vocabulary};
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingModel {
    Cbow,
    SkipGram,
}

impl FromStr for EmbeddingModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cbow" => Ok(EmbeddingModel::Cbow),
            "skipgram" | "sg" => Ok(EmbeddingModel::SkipGram),
            other => Err(format!("unknown embedding model {other:?}")),
        }
    }
}

impl fmt::Display for EmbeddingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingModel::Cbow => "cbow",
            EmbeddingModel::SkipGram => "skipgram",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub model: EmbeddingModel,
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Maximum context distance; the effective window per position is
    /// drawn uniformly from `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub bucket_count: usize,
    pub subword_range: Option<(usize, usize)>,
    /// Frequent-word subsampling threshold; `None` keeps every token.
    pub sampling_threshold: Option<f64>,
    pub seed: u64,
    pub threads: usize,
    /// CBOW only: probability that a position is masked. Masked positions
    /// are hidden from every context window and are the only prediction
    /// targets, mirroring masked-token prediction.
    pub context_mask: Option<f64>,
    /// Lines longer than this many tokens are truncated.
    pub max_seq_len: Option<usize>,
    /// When continuing from `init`, append corpus words it lacks. If false
    /// the vocabulary is frozen and unknown tokens are skipped.
    pub extend_vocab: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            model: EmbeddingModel::Cbow,
            dim: 50,
            lr: 0.05,
            epochs: 5,
            window: 5,
            negatives: 5,
            min_count: 5,
            bucket_count: 2_000_000,
            subword_range: Some((3, 6)),
            sampling_threshold: Some(1e-4),
            seed: 0,
            threads: 1,
            context_mask: None,
            max_seq_len: None,
            extend_vocab: true,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr must be positive"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.threads != 1 {
            return Err(Error::invalid("only threads=1 (deterministic mode) is supported"));
        }
        if let Some(p) = self.context_mask {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("context_mask must lie in [0, 1]"));
            }
            if self.model != EmbeddingModel::Cbow {
                return Err(Error::invalid("context_mask applies to the cbow model only"));
            }
        }
        if let Some((lo, hi)) = self.subword_range {
            if lo == 0 || lo > hi {
                return Err(Error::invalid("subword range must satisfy 1 <= min_n <= max_n"));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Vocabulary and input table to start from, reconciled with the corpus
/// counts: `init` words keep their ids and rows, corpus words not yet known
/// are appended with fresh rows.
fn reconcile(
    ranked: Vec<(String, u64)>,
    config: &EmbeddingConfig,
    init: Option<&WordVectors>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vocabulary, EmbeddingTable)> {
    let Some(init) = init else {
        if ranked.is_empty() {
            return Err(Error::invalid(format!(
                "no word reaches min_count={}; vocabulary would be empty",
                config.min_count
            )));
        }
        let (words, counts): (Vec<String>, Vec<u64>) = ranked.into_iter().unzip();
        let vocab = Vocabulary::from_parts(words, counts, config.bucket_count, 1, config.subword_range);
        let table = EmbeddingTable::random(vocab.n_words(), vocab.bucket_count, config.dim, rng);
        return Ok((vocab, table));
    };
    if init.table.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            expected: config.dim,
            found: init.table.dim(),
        });
    }
    let corpus_counts: std::collections::HashMap<&str, u64> =
        ranked.iter().map(|(w, c)| (w.as_str(), *c)).collect();
    let mut vocab = init.vocab.clone();
    let counts = vocab
        .words()
        .iter()
        .map(|w| corpus_counts.get(w.as_str()).copied().unwrap_or(0))
        .collect();
    vocab.set_counts(counts);
    let added = if config.extend_vocab {
        vocab.extend_words(ranked.iter().cloned())
    } else {
        0
    };

    let mut table = init.table.clone();
    let fresh = EmbeddingTable::random(added, 0, config.dim, rng);
    for i in 0..added {
        table.words.push_row(fresh.words.row(i));
    }
    Ok((vocab, table))
}

struct NegativeSampler {
    dist: Option<WeightedIndex<f64>>,
}

impl NegativeSampler {
    fn new(vocab: &Vocabulary) -> Self {
        let weights: Vec<f64> = vocab.counts().iter().map(|&c| (c as f64).powf(0.75)).collect();
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        // With a single candidate every draw would equal the target.
        let dist = if positive >= 2 { WeightedIndex::new(weights).ok() } else { None };
        NegativeSampler { dist }
    }

    fn draw(&self, target: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let dist = self.dist.as_ref()?;
        loop {
            let n = dist.sample(rng);
            if n != target {
                return Some(n);
            }
        }
    }
}

struct Trainer<'a> {
    vocab: &'a Vocabulary,
    input: &'a mut EmbeddingTable,
    output: Matrix<f32>,
    sampler: NegativeSampler,
    negatives: usize,
    hidden: Vec<f32>,
    grad: Vec<f32>,
}

impl Trainer<'_> {
    fn binary_logistic(&mut self, target: usize, positive: bool, lr: f32) -> f64 {
        let score = sigmoid(dot(self.output.row(target), &self.hidden));
        let label = if positive { 1.0 } else { 0.0 };
        let alpha = lr * (label - score);
        axpy(alpha, self.output.row(target), &mut self.grad);
        axpy(alpha, &self.hidden, self.output.row_mut(target));
        let p = if positive { score } else { 1.0 - score };
        -(p.max(1e-7) as f64).ln()
    }

    /// One negative-sampling update of `rows` towards predicting `target`.
    fn update(&mut self, rows: &[usize], target: usize, lr: f32, rng: &mut ChaCha8Rng) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        for &r in rows {
            axpy(1.0, self.input.row(r), &mut self.hidden);
        }
        let scale = 1.0 / rows.len() as f32;
        self.hidden.iter_mut().for_each(|h| *h *= scale);
        self.grad.iter_mut().for_each(|g| *g = 0.0);

        let mut loss = self.binary_logistic(target, true, lr);
        for _ in 0..self.negatives {
            if let Some(neg) = self.sampler.draw(target, rng) {
                loss += self.binary_logistic(neg, false, lr);
            }
        }
        for &r in rows {
            axpy(1.0, &self.grad, self.input.row_mut(r));
        }
        loss
    }

    fn word_rows(&self, id: usize, out: &mut Vec<usize>) {
        out.push(id);
        out.extend_from_slice(self.vocab.word_subwords(id));
    }
}

/// Trains (or continues training) input embeddings on whitespace-tokenized
/// lines.
///
/// With `init`, its vocabulary, hash buckets and subword setting are reused
/// and corpus words it lacks are appended; rows of words that never occur
/// in the corpus receive no update. `epochs = 0` returns `init` untouched.
pub fn train_unsupervised<'a, I>(lines: I, config: &EmbeddingConfig, init: Option<&WordVectors>) -> Result<WordVectors>
where
    I: IntoIterator<Item = &'a str>,
{
    config.validate()?;
    let lines: Vec<&str> = lines.into_iter().collect();
    let counted = count_words(lines.iter().copied());
    if counted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if config.epochs == 0 {
        if let Some(init) = init {
            return Ok(init.clone());
        }
    }
    let mut rng = seeded_rng(config.seed);
    let ranked = rank_words(counted, config.min_count);
    let (vocab, mut table) = reconcile(ranked, config, init, &mut rng)?;

    let corpus: Vec<Vec<usize>> = lines
        .iter()
        .map(|line| {
            let mut ids: Vec<usize> = line
                .split_whitespace()
                .filter_map(|t| vocab.id(t))
                .filter(|&id| vocab.counts()[id] > 0)
                .collect();
            if let Some(max) = config.max_seq_len {
                ids.truncate(max);
            }
            ids
        })
        .collect();
    let total_count: u64 = vocab.counts().iter().sum();
    let keep_prob: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| match config.sampling_threshold {
            Some(t) if c > 0 => {
                let f = c as f64 / total_count as f64;
                (t / f).sqrt() + t / f
            }
            _ => 1.0,
        })
        .collect();

    let tokens_per_epoch: usize = corpus.iter().map(Vec::len).sum();
    let total_tokens = (tokens_per_epoch * config.epochs).max(1) as f64;
    let mut trainer = Trainer {
        vocab: &vocab,
        output: Matrix::zeros(vocab.n_words(), config.dim),
        sampler: NegativeSampler::new(&vocab),
        negatives: config.negatives,
        hidden: vec![0.0; config.dim],
        grad: vec![0.0; config.dim],
        input: &mut table,
    };

    let mut processed = 0usize;
    let mut rows = Vec::new();
    let mut sentence = Vec::new();
    for _ in 0..config.epochs {
        for line in &corpus {
            let lr = (config.lr * (1.0 - processed as f64 / total_tokens)).max(0.0) as f32;
            processed += line.len();
            sentence.clear();
            for &id in line {
                if keep_prob[id] >= 1.0 || rng.random::<f64>() < keep_prob[id] {
                    sentence.push(id);
                }
            }
            let masked: Option<Vec<bool>> = config
                .context_mask
                .map(|p| sentence.iter().map(|_| rng.random::<f64>() < p).collect());
            for w in 0..sentence.len() {
                if masked.as_ref().is_some_and(|m| !m[w]) {
                    continue;
                }
                let reach = rng.random_range(1..=config.window);
                let lo = w.saturating_sub(reach);
                let hi = (w + reach).min(sentence.len() - 1);
                match config.model {
                    EmbeddingModel::Cbow => {
                        rows.clear();
                        for c in lo..=hi {
                            if c == w || masked.as_ref().is_some_and(|m| m[c]) {
                                continue;
                            }
                            trainer.word_rows(sentence[c], &mut rows);
                        }
                        trainer.update(&rows, sentence[w], lr, &mut rng);
                    }
                    EmbeddingModel::SkipGram => {
                        rows.clear();
                        trainer.word_rows(sentence[w], &mut rows);
                        for (c, &target) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                            if c != w {
                                trainer.update(&rows, target, lr, &mut rng);
                            }
                        }
                    }
                }
            }
        }
    }
    drop(trainer);
    Ok(WordVectors { vocab, table })
}
