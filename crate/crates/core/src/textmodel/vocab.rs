use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Word-to-row mapping plus the hashed feature space.
///
/// Rows `0..n_words` are whole words; rows `n_words..n_words + bucket_count`
/// are shared by hashed word n-grams (order 2..=`word_ngrams`) and, when
/// enabled, character n-grams of each word wrapped in `<` `>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    word_to_id: HashMap<String, usize>,
    pub bucket_count: usize,
    pub word_ngrams: usize,
    pub subword_range: Option<(usize, usize)>,
    subword_cache: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    words: Vec<String>,
    counts: Vec<u64>,
    bucket_count: usize,
    word_ngrams: usize,
    subword_range: Option<(usize, usize)>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.words, r.counts, r.bucket_count, r.word_ngrams, r.subword_range)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            words: v.words,
            counts: v.counts,
            bucket_count: v.bucket_count,
            word_ngrams: v.word_ngrams,
            subword_range: v.subword_range,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
            && self.counts == other.counts
            && self.bucket_count == other.bucket_count
            && self.word_ngrams == other.word_ngrams
            && self.subword_range == other.subword_range
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabConfig {
    pub min_count: u64,
    pub bucket_count: usize,
    pub word_ngrams: usize,
    pub subword_range: Option<(usize, usize)>,
}

/// Counts whitespace tokens; returns `(word, count)` in first-occurrence order.
pub(crate) fn count_words<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vec<(String, u64)> {
    let mut index: HashMap<&'a str, usize> = HashMap::new();
    let mut counted: Vec<(&'a str, u64)> = Vec::new();
    for text in texts {
        for token in text.split_whitespace() {
            match index.get(token) {
                Some(&i) => counted[i].1 += 1,
                None => {
                    index.insert(token, counted.len());
                    counted.push((token, 1));
                }
            }
        }
    }
    counted.into_iter().map(|(w, c)| (w.to_string(), c)).collect()
}

/// Ids by descending count, ties by first occurrence (stable sort).
pub(crate) fn rank_words(mut counted: Vec<(String, u64)>, min_count: u64) -> Vec<(String, u64)> {
    counted.retain(|(_, c)| *c >= min_count);
    counted.sort_by_key(|w| std::cmp::Reverse(w.1));
    counted
}

pub fn build_vocab<'a, I: IntoIterator<Item = &'a str>>(texts: I, config: &VocabConfig) -> Result<Vocabulary> {
    let counted = count_words(texts);
    if counted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ranked = rank_words(counted, config.min_count);
    if ranked.is_empty() {
        return Err(Error::invalid(format!(
            "no word reaches min_count={}; vocabulary would be empty",
            config.min_count
        )));
    }
    let (words, counts) = ranked.into_iter().unzip();
    Ok(Vocabulary::from_parts(
        words,
        counts,
        config.bucket_count,
        config.word_ngrams,
        config.subword_range,
    ))
}

impl Vocabulary {
    pub fn from_parts(
        words: Vec<String>,
        counts: Vec<u64>,
        bucket_count: usize,
        word_ngrams: usize,
        subword_range: Option<(usize, usize)>,
    ) -> Self {
        assert_eq!(words.len(), counts.len(), "one count per word");
        let word_to_id = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut vocab = Vocabulary {
            words,
            counts,
            word_to_id,
            bucket_count,
            word_ngrams: word_ngrams.max(1),
            subword_range,
            subword_cache: Vec::new(),
        };
        vocab.subword_cache = (0..vocab.words.len()).map(|i| vocab.subword_ids(&vocab.words[i])).collect();
        vocab
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Total addressable rows: words plus hash buckets.
    pub fn n_rows(&self) -> usize {
        self.words.len() + self.bucket_count
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, word: &str) -> u64 {
        self.id(word).map_or(0, |i| self.counts[i])
    }

    fn bucket_row(&self, hash: u64) -> Option<usize> {
        (self.bucket_count > 0).then(|| self.words.len() + (hash % self.bucket_count as u64) as usize)
    }

    /// Bucket rows of the character n-grams of `<word>`; empty when subwords
    /// are disabled or there are no buckets.
    pub fn subword_ids(&self, word: &str) -> Vec<usize> {
        let Some((min_n, max_n)) = self.subword_range else {
            return Vec::new();
        };
        if self.bucket_count == 0 {
            return Vec::new();
        }
        let wrapped: Vec<char> = std::iter::once('<').chain(word.chars()).chain(std::iter::once('>')).collect();
        let mut ids = Vec::new();
        let mut buf = String::new();
        for start in 0..wrapped.len() {
            for n in min_n..=max_n {
                if start + n > wrapped.len() {
                    break;
                }
                buf.clear();
                buf.extend(&wrapped[start..start + n]);
                ids.extend(self.bucket_row(fnv1a64(buf.as_bytes())));
            }
        }
        ids
    }

    /// Cached [`Vocabulary::subword_ids`] for an in-vocabulary word.
    pub fn word_subwords(&self, id: usize) -> &[usize] {
        &self.subword_cache[id]
    }

    /// Rows representing one word: its own row (if known) and its subwords.
    pub fn word_rows(&self, word: &str) -> Vec<usize> {
        match self.id(word) {
            Some(id) => std::iter::once(id).chain(self.subword_cache[id].iter().copied()).collect(),
            None => self.subword_ids(word),
        }
    }

    /// Feature rows of a token sequence: word rows and subwords of every
    /// token, then hashed word n-grams of order 2..=`word_ngrams`. Unknown
    /// tokens still take part in n-grams.
    pub fn features(&self, tokens: &[&str]) -> Vec<usize> {
        let mut feats = Vec::with_capacity(tokens.len() * self.word_ngrams);
        for token in tokens {
            feats.extend(self.word_rows(token));
        }
        if self.bucket_count > 0 {
            let mut buf = String::new();
            for n in 2..=self.word_ngrams {
                for window in tokens.windows(n) {
                    buf.clear();
                    for (i, w) in window.iter().enumerate() {
                        if i > 0 {
                            buf.push(' ');
                        }
                        buf.push_str(w);
                    }
                    feats.extend(self.bucket_row(fnv1a64(buf.as_bytes())));
                }
            }
        }
        feats
    }

    /// Appends words (with counts) not yet present; returns how many were added.
    pub fn extend_words<I: IntoIterator<Item = (String, u64)>>(&mut self, words: I) -> usize {
        let before = self.words.len();
        for (word, count) in words {
            if self.word_to_id.contains_key(&word) {
                continue;
            }
            self.word_to_id.insert(word.clone(), self.words.len());
            self.subword_cache.push(self.subword_ids(&word));
            self.words.push(word);
            self.counts.push(count);
        }
        self.words.len() - before
    }

    pub(crate) fn set_counts(&mut self, counts: Vec<u64>) {
        assert_eq!(counts.len(), self.words.len());
        self.counts = counts;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(min_count: u64) -> VocabConfig {
        VocabConfig {
            min_count,
            bucket_count: 1000,
            word_ngrams: 2,
            subword_range: None,
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn ids_by_count_then_first_occurrence() {
        let v = build_vocab(["a b a"], &config(1)).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.counts(), &[2, 1]);
        let tie = build_vocab(["z y x"], &config(1)).unwrap();
        assert_eq!(tie.words(), &["z", "y", "x"]);
    }

    #[test]
    fn deterministic_and_min_count_errors() {
        let a = build_vocab(["a b a", "c"], &config(1)).unwrap();
        let b = build_vocab(["a b a", "c"], &config(1)).unwrap();
        assert_eq!(a, b);
        assert!(build_vocab(["a b a"], &config(3)).is_err());
        assert!(matches!(build_vocab(Vec::<&str>::new(), &config(1)), Err(Error::EmptyInput)));
    }

    #[test]
    fn features_stay_in_range() {
        let v = build_vocab(["a b c"], &config(1)).unwrap();
        let f = v.features(&["a", "b", "unk"]);
        // 2 known words + 2 bigrams
        assert_eq!(f.len(), 4);
        assert_eq!(&f[..2], &[0, 1]);
        assert!(f[2..].iter().all(|r| (3..3 + 1000).contains(r)));
    }

    #[test]
    fn subwords_cover_wrapped_word() {
        let v = Vocabulary::from_parts(vec!["ab".into()], vec![1], 100, 1, Some((2, 3)));
        // "<ab>": 3 bigrams + 2 trigrams
        assert_eq!(v.word_subwords(0).len(), 5);
        assert_eq!(v.word_rows("ab").len(), 6);
        assert_eq!(v.word_rows("zz").len(), 5);
    }

    #[test]
    fn extend_keeps_existing_ids() {
        let mut v = build_vocab(["a b a"], &config(1)).unwrap();
        let added = v.extend_words([("b".into(), 9), ("c".into(), 4)]);
        assert_eq!(added, 1);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("c"), Some(2));
    }
}
