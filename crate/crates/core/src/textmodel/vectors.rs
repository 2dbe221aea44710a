//! Word-vector text format: a `<n_words> <dim>` header, then one line per
//! word with `dim` space-separated decimals.

use std::io::{BufRead, Write};

use super::matrix::Matrix;
use super::supervised::WordVectors;
use super::table::EmbeddingTable;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// Writes the composed vector (own row plus subwords) of every word, in id
/// order. Floats use the shortest representation that reads back exactly.
pub fn save_vectors<W: Write>(table: &EmbeddingTable, vocab: &Vocabulary, mut sink: W) -> Result<()> {
    writeln!(sink, "{} {}", vocab.n_words(), table.dim())?;
    let mut line = String::new();
    for (id, word) in vocab.words().iter().enumerate() {
        line.clear();
        line.push_str(word);
        for v in table.word_vector(vocab, id) {
            line.push(' ');
            line.push_str(&v.to_string());
        }
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

/// Reads vectors back as a word-only vocabulary (no buckets, no subwords).
pub fn load_vectors<R: BufRead>(source: R) -> Result<WordVectors> {
    let mut lines = source.lines();
    let header = lines.next().ok_or_else(|| Error::record(1, "missing header"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [n, d] = parts[..] else {
        return Err(Error::record(1, "header must be \"<n_words> <dim>\""));
    };
    let n_words: usize = n.parse().map_err(|_| Error::record(1, format!("bad word count {n:?}")))?;
    let dim: usize = d.parse().map_err(|_| Error::record(1, format!("bad dimension {d:?}")))?;
    if dim == 0 {
        return Err(Error::record(1, "dimension must be positive"));
    }

    let mut words = Vec::with_capacity(n_words);
    let mut data = Vec::with_capacity(n_words * dim);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n_words {
            return Err(Error::record(line_no, format!("more rows than the {n_words} announced")));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line has a field");
        let before = data.len();
        for field in fields {
            let v: f32 = field
                .parse()
                .map_err(|_| Error::record(line_no, format!("bad number {field:?}")))?;
            data.push(v);
        }
        let found = data.len() - before;
        if found != dim {
            return Err(Error::record(line_no, format!("expected {dim} values, found {found}")));
        }
        words.push(word.to_string());
    }
    if words.len() != n_words {
        return Err(Error::record(
            words.len() + 2,
            format!("expected {n_words} rows, found {}", words.len()),
        ));
    }
    let vocab = Vocabulary::from_parts(words, vec![0; n_words], 0, 1, None);
    if vocab.words().len() != n_words || (0..n_words).any(|i| vocab.id(vocab.word(i)) != Some(i)) {
        return Err(Error::invalid("duplicate word in vectors file"));
    }
    let table = EmbeddingTable::new(Matrix::from_vec(n_words, dim, data), Matrix::zeros(0, dim))?;
    Ok(WordVectors { vocab, table })
}
