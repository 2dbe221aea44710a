use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// Input embeddings: one row per word followed by the hash buckets.
///
/// Word and bucket rows are stored separately so that appending words never
/// moves a bucket row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub words: Matrix<f32>,
    pub buckets: Matrix<f32>,
}

impl EmbeddingTable {
    /// Rows uniform in `[-1/dim, 1/dim]`.
    pub fn random<R: Rng>(n_words: usize, bucket_count: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / dim as f32;
        EmbeddingTable {
            words: Matrix::uniform(n_words, dim, bound, rng),
            buckets: Matrix::uniform(bucket_count, dim, bound, rng),
        }
    }

    pub fn new(words: Matrix<f32>, buckets: Matrix<f32>) -> Result<Self> {
        if words.cols() == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if buckets.rows() > 0 && buckets.cols() != words.cols() {
            return Err(Error::DimensionMismatch {
                expected: words.cols(),
                found: buckets.cols(),
            });
        }
        Ok(EmbeddingTable { words, buckets })
    }

    pub fn dim(&self) -> usize {
        self.words.cols()
    }

    pub fn n_words(&self) -> usize {
        self.words.rows()
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.rows()
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        let n = self.words.rows();
        if idx < n {
            self.words.row(idx)
        } else {
            self.buckets.row(idx - n)
        }
    }

    pub fn row_mut(&mut self, idx: usize) -> &mut [f32] {
        let n = self.words.rows();
        if idx < n {
            self.words.row_mut(idx)
        } else {
            self.buckets.row_mut(idx - n)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.words.is_finite() && self.buckets.is_finite()
    }

    /// Vector for word `id`: the mean of its own row and its subword rows.
    pub fn word_vector(&self, vocab: &Vocabulary, id: usize) -> Vec<f32> {
        let subwords = vocab.word_subwords(id);
        let mut v = self.words.row(id).to_vec();
        if subwords.is_empty() {
            return v;
        }
        for &s in subwords {
            for (a, b) in v.iter_mut().zip(self.row(s)) {
                *a += b;
            }
        }
        let scale = 1.0 / (subwords.len() + 1) as f32;
        v.iter_mut().for_each(|a| *a *= scale);
        v
    }

    /// Cosine similarity between the vectors of two known words.
    pub fn cosine(&self, vocab: &Vocabulary, a: &str, b: &str) -> Option<f32> {
        let va = self.word_vector(vocab, vocab.id(a)?);
        let vb = self.word_vector(vocab, vocab.id(b)?);
        let dot: f32 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let na: f32 = va.iter().map(|x| x * x).sum::<f32>().sqrt();
        let nb: f32 = vb.iter().map(|x| x * x).sum::<f32>().sqrt();
        Some(if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) })
    }
}
