//! Binary container for trained classifiers.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      4 bytes  "GFTM"
//! version    u32
//! header_len u64
//! header     JSON: config, rule set text and id, labels, vocabulary, shapes
//! input      f32 * n_words * dim      (word rows)
//! buckets    f32 * bucket_count * dim
//! output     f32 * n_labels * dim
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::supervised::{SupervisedModel, TrainConfig};
use super::table::EmbeddingTable;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::normalize::RuleSet;

pub const MAGIC: [u8; 4] = *b"GFTM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    ruleset_id: String,
    ruleset: String,
    labels: Vec<String>,
    vocab: Vocabulary,
    dim: usize,
    epoch_loss: Vec<f64>,
}

fn write_floats<W: Write>(out: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_floats<R: Read>(input: &mut R, count: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; count * 4];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated matrix data: {e}")))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn save_model<W: Write>(model: &SupervisedModel, mut out: W) -> Result<()> {
    let header = Header {
        config: model.config.clone(),
        ruleset_id: model.ruleset.id(),
        ruleset: model.ruleset.to_rules_text(),
        labels: model.labels.clone(),
        vocab: model.vocab.clone(),
        dim: model.input.dim(),
        epoch_loss: model.epoch_loss.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    write_floats(&mut out, model.input.words.as_slice())?;
    write_floats(&mut out, model.input.buckets.as_slice())?;
    write_floats(&mut out, model.output.as_slice())?;
    out.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(mut input: R) -> Result<SupervisedModel> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short".into()))?;
    if magic != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let header_len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; header_len];
    input
        .read_exact(&mut json)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&json)?;

    let ruleset = RuleSet::from_rules_text(&header.ruleset)?;
    if ruleset.id() != header.ruleset_id {
        return Err(Error::Format("rule set does not match its recorded id".into()));
    }
    let dim = header.dim;
    let n_words = header.vocab.n_words();
    let buckets = header.vocab.bucket_count;
    let words = Matrix::from_vec(n_words, dim, read_floats(&mut input, n_words * dim)?);
    let bucket_rows = Matrix::from_vec(buckets, dim, read_floats(&mut input, buckets * dim)?);
    let output = Matrix::from_vec(
        header.labels.len(),
        dim,
        read_floats(&mut input, header.labels.len() * dim)?,
    );
    Ok(SupervisedModel {
        vocab: header.vocab,
        input: EmbeddingTable::new(words, bucket_rows)?,
        output,
        labels: header.labels,
        config: header.config,
        ruleset,
        epoch_loss: header.epoch_loss,
    })
}
