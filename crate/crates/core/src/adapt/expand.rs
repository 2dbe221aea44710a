//! Append-only vocabulary expansion.

use rand_distr::{Distribution, Normal};

use crate::seeded_rng;
use crate::textmodel::{EmbeddingTable, Vocabulary};
use crate::textmodel::{count_words, rank_words};

pub const DEFAULT_MAX_NEW: usize = 20_000;

/// Component-wise population standard deviation of the word rows. Falls
/// back to the spread of the default uniform initializer when fewer than
/// two rows exist.
fn row_std(table: &EmbeddingTable) -> Vec<f64> {
    let dim = table.dim();
    let n = table.n_words();
    if n < 2 {
        let bound = 1.0 / dim as f64;
        return vec![bound / 3f64.sqrt(); dim];
    }
    let mut mean = vec![0.0f64; dim];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(table.words.row(i)) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0f64; dim];
    for i in 0..n {
        for ((s, &v), m) in var.iter_mut().zip(table.words.row(i)).zip(&mean) {
            let d = f64::from(v) - m;
            *s += d * d;
        }
    }
    var.into_iter().map(|s| (s / n as f64).sqrt()).collect()
}

/// Appends the `max_new` most frequent corpus words missing from `vocab`
/// (ties broken by first occurrence). New rows are drawn from
/// `N(0, sigma_j)` per component, where `sigma_j` is the spread of the
/// existing rows. Existing ids and rows are untouched.
pub fn expand_vocab<'a, I>(
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    corpus: I,
    max_new: usize,
    seed: u64,
) -> (Vocabulary, EmbeddingTable)
where
    I: IntoIterator<Item = &'a str>,
{
    let candidates: Vec<(String, u64)> = rank_words(count_words(corpus), 1)
        .into_iter()
        .filter(|(w, _)| vocab.id(w).is_none())
        .take(max_new)
        .collect();
    let mut new_vocab = vocab.clone();
    let mut new_table = table.clone();
    if candidates.is_empty() {
        return (new_vocab, new_table);
    }
    let normals: Vec<Normal<f64>> = row_std(table)
        .into_iter()
        .map(|s| Normal::new(0.0, s).expect("finite non-negative std"))
        .collect();
    let mut rng = seeded_rng(seed);
    let added = new_vocab.extend_words(candidates);
    let mut row = vec![0.0f32; table.dim()];
    for _ in 0..added {
        for (r, n) in row.iter_mut().zip(&normals) {
            *r = n.sample(&mut rng) as f32;
        }
        new_table.words.push_row(&row);
    }
    (new_vocab, new_table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base(n: usize, dim: usize) -> (Vocabulary, EmbeddingTable) {
        let words = (0..n).map(|i| format!("alt{i}")).collect();
        let vocab = Vocabulary::from_parts(words, vec![1; n], 0, 1, None);
        (vocab, EmbeddingTable::random(n, 0, dim, &mut seeded_rng(3)))
    }

    #[test]
    fn covered_corpus_adds_nothing() {
        let (v, t) = base(4, 3);
        let (v2, t2) = expand_vocab(&v, &t, ["alt0 alt1", "alt3"], 10, 0);
        assert_eq!(v2, v);
        assert_eq!(t2, t);
    }

    #[test]
    fn cap_and_frequency_order() {
        let (v, t) = base(3, 4);
        let lines = ["neu1 neu2 neu2 alt0", "neu3 neu2 neu3", "neu4"];
        let (v2, t2) = expand_vocab(&v, &t, lines, 2, 0);
        assert_eq!(&v2.words()[3..], ["neu2", "neu3"]);
        assert_eq!(t2.n_words(), 5);
    }

    #[test]
    fn new_rows_follow_existing_spread() {
        let (v, t) = base(400, 2);
        let lines: Vec<String> = (0..4000).map(|i| format!("n{i}")).collect();
        let (_, t2) = expand_vocab(&v, &t, lines.iter().map(String::as_str), 4000, 5);
        let want = row_std(&t);
        let fresh = EmbeddingTable::new(
            crate::textmodel::Matrix::from_vec(4000, 2, t2.words.as_slice()[800..].to_vec()),
            crate::textmodel::Matrix::zeros(0, 2),
        )
        .unwrap();
        let got = row_std(&fresh);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() / w < 0.1, "std {g} vs {w}");
        }
    }

    proptest! {
        #[test]
        fn old_rows_bit_identical(n in 1usize..10, extra in 0usize..30, cap in 0usize..20, seed: u64) {
            let (v, t) = base(n, 3);
            let lines: Vec<String> = (0..extra).map(|i| format!("w{i} alt0")).collect();
            let (v2, t2) = expand_vocab(&v, &t, lines.iter().map(String::as_str), cap, seed);
            prop_assert!(v2.n_words() - v.n_words() <= cap);
            prop_assert_eq!(v2.n_words(), t2.n_words());
            for i in 0..n {
                prop_assert_eq!(v2.id(v.word(i)), Some(i));
                prop_assert_eq!(t2.words.row(i), t.words.row(i));
            }
        }
    }
}
