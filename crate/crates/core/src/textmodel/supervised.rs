//! Bag-of-n-grams linear classifier.
//!
//! A document is the average of its feature rows (words plus hashed word
//! n-grams); a linear layer maps that average to label scores and a full
//! softmax turns them into probabilities. Training is plain SGD on the
//! softmax cross-entropy, one document at a time, with the learning rate
//! decaying linearly in the number of processed tokens.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, Matrix};
use super::table::EmbeddingTable;
use super::vocab::{build_vocab, VocabConfig, Vocabulary};
use crate::corpus::{LabeledDataset, Task};
use crate::error::{Error, Result};
use crate::metrics::{micro_scores, EvalReport};
use crate::normalize::{normalize, CasingMode, RuleSet};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Softmax,
}

impl FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "softmax" => Ok(Loss::Softmax),
            other => Err(format!("unsupported loss {other:?} (only softmax)")),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("softmax")
    }
}

/// Pretrained word vectors used to initialize input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    /// Initial learning rate; decays linearly to 0.
    pub lr: f64,
    pub epochs: usize,
    pub word_ngrams: usize,
    pub loss: Loss,
    pub threads: usize,
    pub seed: u64,
    pub min_count: u64,
    pub bucket_count: usize,
    pub subword_range: Option<(usize, usize)>,
    /// Casing of the standard rule set recorded with the model.
    pub casing: CasingMode,
    /// Provenance of attached pretrained vectors, if any.
    pub pretrained_source: Option<String>,
    #[serde(skip)]
    pub pretrained: Option<Arc<WordVectors>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            lr: 0.1,
            epochs: 20,
            word_ngrams: 4,
            loss: Loss::Softmax,
            threads: 1,
            seed: 0,
            min_count: 1,
            bucket_count: 2_000_000,
            subword_range: None,
            casing: CasingMode::Lowercased,
            pretrained_source: None,
            pretrained: None,
        }
    }
}

impl PartialEq for TrainConfig {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.lr == other.lr
            && self.epochs == other.epochs
            && self.word_ngrams == other.word_ngrams
            && self.loss == other.loss
            && self.threads == other.threads
            && self.seed == other.seed
            && self.min_count == other.min_count
            && self.bucket_count == other.bucket_count
            && self.subword_range == other.subword_range
            && self.casing == other.casing
            && self.pretrained_source == other.pretrained_source
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.word_ngrams == 0 {
            return Err(Error::invalid("word_ngrams must be at least 1"));
        }
        if self.threads != 1 {
            return Err(Error::invalid("only threads=1 (deterministic mode) is supported"));
        }
        if let Some((lo, hi)) = self.subword_range {
            if lo == 0 || lo > hi {
                return Err(Error::invalid("subword range must satisfy 1 <= min_n <= max_n"));
            }
        }
        Ok(())
    }
}

/// Initializes supervised input rows of known words from `vectors`.
pub fn attach_pretrained(config: &TrainConfig, vectors: WordVectors, source: impl Into<String>) -> Result<TrainConfig> {
    if vectors.table.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            expected: config.dim,
            found: vectors.table.dim(),
        });
    }
    let mut out = config.clone();
    out.pretrained_source = Some(source.into());
    out.pretrained = Some(Arc::new(vectors));
    Ok(out)
}

/// Forward and backward pass of softmax cross-entropy for one example.
///
/// Fills `hidden` with the mean of `rows`, `probs` with the softmax of the
/// label scores and `grad_hidden` with d(loss)/d(hidden). The gradient for
/// output row `j` is `(probs[j] - [j == target]) * hidden`; every input row
/// receives `grad_hidden / rows.len()` per occurrence.
pub(crate) fn softmax_forward_backward<T: Float>(
    rows: &[&[T]],
    output: &Matrix<T>,
    target: usize,
    hidden: &mut [T],
    probs: &mut [T],
    grad_hidden: &mut [T],
) -> T {
    hidden.iter_mut().for_each(|h| *h = T::zero());
    for row in rows {
        axpy(T::one(), row, hidden);
    }
    let scale = T::one() / T::from(rows.len()).unwrap();
    hidden.iter_mut().for_each(|h| *h = *h * scale);

    for (j, p) in probs.iter_mut().enumerate() {
        *p = dot(output.row(j), hidden);
    }
    let max = probs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for p in probs.iter_mut() {
        *p = (*p - max).exp();
        z = z + *p;
    }
    probs.iter_mut().for_each(|p| *p = *p / z);

    grad_hidden.iter_mut().for_each(|g| *g = T::zero());
    for (j, &p) in probs.iter().enumerate() {
        let indicator = if j == target { T::one() } else { T::zero() };
        axpy(p - indicator, output.row(j), grad_hidden);
    }
    -probs[target].max(T::min_positive_value()).ln()
}

/// Mean softmax cross-entropy over a frozen mini-batch and its exact
/// gradients with respect to the input and output matrices. Feature ids
/// index rows of `input` directly.
pub fn softmax_loss_gradients(
    input: &Matrix<f64>,
    output: &Matrix<f64>,
    batch: &[(Vec<usize>, usize)],
) -> (f64, Matrix<f64>, Matrix<f64>) {
    let dim = input.cols();
    let mut grad_input = Matrix::zeros(input.rows(), dim);
    let mut grad_output = Matrix::zeros(output.rows(), dim);
    let mut hidden = vec![0.0; dim];
    let mut probs = vec![0.0; output.rows()];
    let mut grad_hidden = vec![0.0; dim];
    let mut loss = 0.0;
    let weight = 1.0 / batch.len() as f64;
    for (features, target) in batch {
        let rows: Vec<&[f64]> = features.iter().map(|&f| input.row(f)).collect();
        loss += weight * softmax_forward_backward(&rows, output, *target, &mut hidden, &mut probs, &mut grad_hidden);
        for (j, &p) in probs.iter().enumerate() {
            let indicator = if j == *target { 1.0 } else { 0.0 };
            axpy(weight * (p - indicator), &hidden, grad_output.row_mut(j));
        }
        let per_row = weight / features.len() as f64;
        for &f in features {
            axpy(per_row, &grad_hidden, grad_input.row_mut(f));
        }
    }
    (loss, grad_input, grad_output)
}

#[derive(Debug, Clone)]
pub struct SupervisedModel {
    pub vocab: Vocabulary,
    pub input: EmbeddingTable,
    /// One row per label.
    pub output: Matrix<f32>,
    pub labels: Vec<String>,
    pub config: TrainConfig,
    pub ruleset: RuleSet,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
}

struct Example {
    features: Vec<usize>,
    tokens: usize,
    label: usize,
}

/// Trains on `dataset` (already normalized) with labels in canonical order,
/// restricted to those that occur.
pub fn train_supervised(dataset: &LabeledDataset, task: Task, config: &TrainConfig) -> Result<SupervisedModel> {
    let golds = dataset.labels(task)?;
    let labels: Vec<&str> = task
        .classes()
        .iter()
        .copied()
        .filter(|c| golds.contains(c))
        .collect();
    train_supervised_with_labels(dataset, task, &labels, config)
}

/// Like [`train_supervised`] but with an explicit label order.
pub fn train_supervised_with_labels(
    dataset: &LabeledDataset,
    task: Task,
    labels: &[&str],
    config: &TrainConfig,
) -> Result<SupervisedModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() < 2 {
        return Err(Error::invalid(format!(
            "softmax needs at least 2 labels, training data has {}",
            labels.len()
        )));
    }
    let golds = dataset.labels(task)?;
    let vocab = build_vocab(
        dataset.texts(),
        &VocabConfig {
            min_count: config.min_count,
            bucket_count: config.bucket_count,
            word_ngrams: config.word_ngrams,
            subword_range: config.subword_range,
        },
    )?;

    let examples = dataset
        .documents
        .iter()
        .zip(&golds)
        .map(|(doc, gold)| {
            let label = labels
                .iter()
                .position(|l| l == gold)
                .ok_or_else(|| Error::invalid(format!("label {gold:?} not in label list")))?;
            let tokens: Vec<&str> = doc.text.split_whitespace().collect();
            Ok(Example {
                features: vocab.features(&tokens),
                tokens: tokens.len(),
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = seeded_rng(config.seed);
    let mut input = EmbeddingTable::random(vocab.n_words(), vocab.bucket_count, config.dim, &mut rng);
    if let Some(pretrained) = &config.pretrained {
        for (id, word) in vocab.words().iter().enumerate() {
            if let Some(pid) = pretrained.vocab.id(word) {
                let v = pretrained.table.word_vector(&pretrained.vocab, pid);
                input.words.row_mut(id).copy_from_slice(&v);
            }
        }
    }
    let mut output = Matrix::zeros(labels.len(), config.dim);

    let tokens_per_epoch: usize = examples.iter().map(|e| e.tokens).sum();
    let total_tokens = (tokens_per_epoch * config.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut hidden = vec![0f32; config.dim];
    let mut probs = vec![0f32; labels.len()];
    let mut grad_hidden = vec![0f32; config.dim];
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        for ex in &examples {
            let lr = (config.lr * (1.0 - processed as f64 / total_tokens)).max(0.0) as f32;
            processed += ex.tokens;
            if ex.features.is_empty() {
                continue;
            }
            let rows: Vec<&[f32]> = ex.features.iter().map(|&f| input.row(f)).collect();
            let loss = softmax_forward_backward(&rows, &output, ex.label, &mut hidden, &mut probs, &mut grad_hidden);
            loss_sum += loss as f64;
            seen += 1;
            for (j, &p) in probs.iter().enumerate() {
                let indicator = if j == ex.label { 1.0 } else { 0.0 };
                axpy(-lr * (p - indicator), &hidden, output.row_mut(j));
            }
            let step = -lr / ex.features.len() as f32;
            for &f in &ex.features {
                axpy(step, &grad_hidden, input.row_mut(f));
            }
        }
        epoch_loss.push(if seen == 0 { 0.0 } else { loss_sum / seen as f64 });
    }

    Ok(SupervisedModel {
        vocab,
        input,
        output,
        labels: labels.iter().map(|l| l.to_string()).collect(),
        config: config.clone(),
        ruleset: RuleSet::standard(config.casing),
        epoch_loss,
    })
}

impl SupervisedModel {
    /// Full label distribution for already-normalized text.
    pub fn distribution(&self, normalized: &str) -> Vec<f64> {
        let tokens: Vec<&str> = normalized.split_whitespace().collect();
        let features = self.vocab.features(&tokens);
        let dim = self.input.dim();
        let mut hidden = vec![0f64; dim];
        for &f in &features {
            for (h, &v) in hidden.iter_mut().zip(self.input.row(f)) {
                *h += v as f64;
            }
        }
        if !features.is_empty() {
            let scale = 1.0 / features.len() as f64;
            hidden.iter_mut().for_each(|h| *h *= scale);
        }
        let scores: Vec<f64> = (0..self.labels.len())
            .map(|j| self.output.row(j).iter().zip(&hidden).map(|(&w, h)| w as f64 * h).sum())
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    /// Most probable label for already-normalized text; ties go to the
    /// earlier label.
    pub fn predict_label(&self, normalized: &str) -> &str {
        let dist = self.distribution(normalized);
        let mut best = 0;
        for (j, &p) in dist.iter().enumerate() {
            if p > dist[best] {
                best = j;
            }
        }
        &self.labels[best]
    }

    /// Top-`k` labels with probabilities for raw text, normalized with the
    /// model's rule set first.
    pub fn predict(&self, text: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let normalized = normalize(text, &self.ruleset);
        if normalized.is_empty() {
            return Err(Error::EmptyInput);
        }
        let dist = self.distribution(&normalized);
        let mut ranked: Vec<(String, f64)> = self.labels.iter().cloned().zip(dist).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Micro-averaged scores on an already-normalized dataset.
    pub fn evaluate(&self, dataset: &LabeledDataset, task: Task) -> Result<EvalReport> {
        let golds = dataset.labels(task)?;
        let preds: Vec<&str> = dataset.texts().map(|t| self.predict_label(t)).collect();
        let label_set: Vec<&str> = task.classes().to_vec();
        micro_scores(&preds, &golds, &label_set)
    }
}
