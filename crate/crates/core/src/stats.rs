//! Corpus statistics over normalized, lowercased text.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub token_count: usize,
    pub unique_unigrams: usize,
    pub unique_bigrams: usize,
    pub unique_trigrams: usize,
    /// Mean document length in whitespace tokens.
    pub mean_doc_length_tokens: f64,
    /// Mean document length in Unicode scalar values.
    pub mean_doc_length_chars: f64,
}

/// Counts unique n-grams (n = 1..3) over whitespace tokens. N-grams never
/// span document boundaries; uniqueness is global.
pub fn compute_stats<'a, I>(texts: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a str>,
{
    let mut unigrams: HashSet<&str> = HashSet::new();
    let mut bigrams: HashSet<(&str, &str)> = HashSet::new();
    let mut trigrams: HashSet<(&str, &str, &str)> = HashSet::new();
    let mut doc_count = 0usize;
    let mut token_count = 0usize;
    let mut char_count = 0usize;

    for text in texts {
        doc_count += 1;
        char_count += text.chars().count();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        token_count += tokens.len();
        unigrams.extend(tokens.iter().copied());
        bigrams.extend(tokens.windows(2).map(|w| (w[0], w[1])));
        trigrams.extend(tokens.windows(3).map(|w| (w[0], w[1], w[2])));
    }

    let mean = |total: usize| if doc_count == 0 { 0.0 } else { total as f64 / doc_count as f64 };
    CorpusStats {
        doc_count,
        token_count,
        unique_unigrams: unigrams.len(),
        unique_bigrams: bigrams.len(),
        unique_trigrams: trigrams.len(),
        mean_doc_length_tokens: mean(token_count),
        mean_doc_length_chars: mean(char_count),
    }
}

impl CorpusStats {
    pub fn table_header() -> String {
        format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12}",
            "subset", "documents", "unigrams", "bigrams", "trigrams", "mean_tokens", "mean_chars"
        )
    }

    /// One aligned row matching [`CorpusStats::table_header`].
    pub fn table_row(&self, subset: &str) -> String {
        format!(
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>12.1} {:>12.1}",
            subset,
            self.doc_count,
            self.unique_unigrams,
            self.unique_bigrams,
            self.unique_trigrams,
            self.mean_doc_length_tokens,
            self.mean_doc_length_chars
        )
    }

    /// `key=value` lines for machine consumption.
    pub fn key_values(&self, subset: &str) -> String {
        format!(
            "subset={subset}\ndocuments={}\ntokens={}\nunigrams={}\nbigrams={}\ntrigrams={}\nmean_length_tokens={}\nmean_length_chars={}\n",
            self.doc_count,
            self.token_count,
            self.unique_unigrams,
            self.unique_bigrams,
            self.unique_trigrams,
            self.mean_doc_length_tokens,
            self.mean_doc_length_chars
        )
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::table_header())?;
        write!(f, "{}", self.table_row("corpus"))
    }
}
