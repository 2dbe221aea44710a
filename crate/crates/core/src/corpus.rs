//! GermEval-style TSV ingestion, cleaning, class statistics and splitting.
//!
//! Records are headerless, tab-separated lines:
//! `id <TAB> text <TAB> relevance <TAB> sentiment [<TAB> aspects]`.
//! The optional trailing aspect column of the original release is carried
//! through untouched so that cleaned files can be written back losslessly.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Neutral,
    Negative,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Neutral, Sentiment::Negative, Sentiment::Positive];

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Neutral => "neutral",
            Sentiment::Negative => "negative",
            Sentiment::Positive => "positive",
        }
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "neutral" => Ok(Sentiment::Neutral),
            "negative" => Ok(Sentiment::Negative),
            "positive" => Ok(Sentiment::Positive),
            other => Err(format!("unknown sentiment literal {other:?}")),
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which label a classifier is trained on: relevance (subtask A) or
/// document-level polarity (subtask B).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Relevance,
    Sentiment,
}

impl Task {
    /// Class labels in canonical order.
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Task::Relevance => &["true", "false"],
            Task::Sentiment => &["neutral", "negative", "positive"],
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "relevance" => Ok(Task::Relevance),
            "b" | "sentiment" => Ok(Task::Sentiment),
            other => Err(format!("unknown task {other:?} (expected A/relevance or B/sentiment)")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Relevance => "relevance",
            Task::Sentiment => "sentiment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub relevance: Option<bool>,
    pub sentiment: Option<Sentiment>,
    /// Raw aspect column, when the source file has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        relevance: Option<bool>,
        sentiment: Option<Sentiment>,
    ) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            relevance,
            sentiment,
            aspects: None,
        }
    }

    /// The label for `task` as its canonical string, if present.
    pub fn label(&self, task: Task) -> Option<&'static str> {
        match task {
            Task::Relevance => self.relevance.map(|r| if r { "true" } else { "false" }),
            Task::Sentiment => self.sentiment.map(Sentiment::as_str),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Training,
    Development,
    TestSyn,
    TestDia,
    Custom,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Training => "training",
            SplitName::Development => "development",
            SplitName::TestSyn => "test_syn",
            SplitName::TestDia => "test_dia",
            SplitName::Custom => "custom",
        }
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "training" | "train" => Ok(SplitName::Training),
            "development" | "dev" => Ok(SplitName::Development),
            "test_syn" => Ok(SplitName::TestSyn),
            "test_dia" => Ok(SplitName::TestDia),
            "custom" => Ok(SplitName::Custom),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub documents: Vec<Document>,
    pub split_name: SplitName,
}

impl LabeledDataset {
    pub fn new(split_name: SplitName, documents: Vec<Document>) -> Self {
        LabeledDataset {
            documents,
            split_name,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents at `indices`, in the given order.
    pub fn select(&self, indices: &[usize], split_name: SplitName) -> LabeledDataset {
        LabeledDataset::new(
            split_name,
            indices.iter().map(|&i| self.documents[i].clone()).collect(),
        )
    }

    /// Concatenation of `self` followed by `other`.
    pub fn concat(&self, other: &LabeledDataset, split_name: SplitName) -> LabeledDataset {
        let mut documents = self.documents.clone();
        documents.extend(other.documents.iter().cloned());
        LabeledDataset::new(split_name, documents)
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    /// Labels for `task`; errors on the first document without one.
    pub fn labels(&self, task: Task) -> Result<Vec<&'static str>> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.label(task).ok_or_else(|| {
                    Error::invalid(format!("document {} ({}) has no {task} label", i, d.id))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed record.
    #[default]
    Strict,
    /// Skip malformed records and report them.
    Lenient,
}

#[derive(Debug)]
pub struct ParsedTsv {
    pub dataset: LabeledDataset,
    /// Records skipped in lenient mode, including a detected header line.
    pub rejected: Vec<Error>,
}

fn parse_relevance(s: &str) -> std::result::Result<Option<bool>, String> {
    match s {
        "true" => Ok(Some(true)),
        "false" => Ok(Some(false)),
        "" => Ok(None),
        other => Err(format!("unknown relevance literal {other:?}")),
    }
}

fn parse_record(line: &str, line_no: usize) -> Result<Document> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 && fields.len() != 5 {
        return Err(Error::record(
            line_no,
            format!("expected 4 tab-separated fields, found {}", fields.len()),
        ));
    }
    if fields[0].is_empty() {
        return Err(Error::record(line_no, "empty document id"));
    }
    let relevance = parse_relevance(fields[2]).map_err(|m| Error::record(line_no, m))?;
    let sentiment = match fields[3] {
        "" => None,
        s => Some(s.parse::<Sentiment>().map_err(|m| Error::record(line_no, m))?),
    };
    Ok(Document {
        id: fields[0].to_string(),
        text: fields[1].to_string(),
        relevance,
        sentiment,
        aspects: fields.get(4).map(|s| s.to_string()),
    })
}

fn looks_like_header(line: &str) -> bool {
    let first = line.split('\t').next().unwrap_or("");
    !(first.starts_with("http://") || first.starts_with("https://"))
}

/// Parses a GermEval TSV stream. Blank lines are ignored.
pub fn parse_tsv<R: BufRead>(reader: R, split_name: SplitName, mode: ParseMode) -> Result<ParsedTsv> {
    let mut documents = Vec::new();
    let mut rejected = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line, line_no) {
            Ok(doc) => documents.push(doc),
            Err(e) => match mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => {
                    if line_no == 1 && looks_like_header(line) {
                        rejected.push(Error::record(line_no, "header line skipped"));
                    } else {
                        rejected.push(e);
                    }
                }
            },
        }
    }
    Ok(ParsedTsv {
        dataset: LabeledDataset::new(split_name, documents),
        rejected,
    })
}

/// Writes `dataset` in the same schema `parse_tsv` reads.
pub fn write_tsv<W: Write>(dataset: &LabeledDataset, mut out: W) -> Result<()> {
    for doc in &dataset.documents {
        let relevance = match doc.relevance {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        let sentiment = doc.sentiment.map(Sentiment::as_str).unwrap_or("");
        write!(out, "{}\t{}\t{}\t{}", doc.id, doc.text, relevance, sentiment)?;
        if let Some(aspects) = &doc.aspects {
            write!(out, "\t{aspects}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Drops documents with empty or whitespace-only text and exact duplicates
/// (byte-equal raw text), keeping the first occurrence.
pub fn clean(dataset: &LabeledDataset) -> LabeledDataset {
    let mut seen: HashSet<&str> = HashSet::new();
    let documents = dataset
        .documents
        .iter()
        .filter(|d| !d.text.trim().is_empty() && seen.insert(d.text.as_str()))
        .cloned()
        .collect();
    LabeledDataset::new(dataset.split_name, documents)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDistribution {
    pub task: Task,
    /// Counts in canonical class order.
    pub counts: Vec<(&'static str, usize)>,
}

impl ClassDistribution {
    pub fn get(&self, class: &str) -> usize {
        self.counts
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, n)| n).sum()
    }
}

pub fn class_distribution(dataset: &LabeledDataset, task: Task) -> Result<ClassDistribution> {
    let mut counts: Vec<(&'static str, usize)> = task.classes().iter().map(|&c| (c, 0)).collect();
    for label in dataset.labels(task)? {
        if let Some(slot) = counts.iter_mut().find(|(c, _)| *c == label) {
            slot.1 += 1;
        }
    }
    Ok(ClassDistribution { task, counts })
}

/// One cross-validation split as ascending indices into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Fold {
    pub fn materialize(&self, dataset: &LabeledDataset) -> (LabeledDataset, LabeledDataset) {
        (
            dataset.select(&self.train, SplitName::Custom),
            dataset.select(&self.validation, SplitName::Custom),
        )
    }
}

/// Stratified k-fold split.
///
/// Each class is shuffled with a generator seeded from `seed`; classes are
/// then concatenated in canonical order and dealt round-robin to the folds
/// with a single running counter. Per-class fold counts therefore differ by
/// at most one, and so do total fold sizes.
pub fn stratified_kfold(dataset: &LabeledDataset, k: usize, task: Task, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let labels = dataset.labels(task)?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        let class = task
            .classes()
            .iter()
            .position(|c| c == label)
            .expect("labels come from the task's class list");
        by_class.entry(class).or_default().push(i);
    }
    for (&class, members) in &by_class {
        if members.len() < k {
            return Err(Error::invalid(format!(
                "class {:?} has {} members, fewer than k={k}",
                task.classes()[class],
                members.len()
            )));
        }
    }

    let mut rng = seeded_rng(seed);
    let mut assignment = vec![0usize; dataset.len()];
    let mut next = 0usize;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &doc in members.iter() {
            assignment[doc] = next % k;
            next += 1;
        }
    }

    Ok((0..k)
        .map(|fold| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| assignment[i] == fold);
            Fold { train, validation }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnlabeledCorpus {
    pub lines: Vec<String>,
    pub source_tag: String,
}

impl UnlabeledCorpus {
    pub fn new(source_tag: impl Into<String>, lines: Vec<String>) -> Self {
        UnlabeledCorpus {
            lines,
            source_tag: source_tag.into(),
        }
    }

    /// Reads newline-delimited UTF-8 text; every line is kept as-is.
    pub fn read<R: BufRead>(reader: R, source_tag: impl Into<String>) -> Result<Self> {
        let lines = reader
            .lines()
            .map(|l| l.map(|s| s.strip_suffix('\r').map(str::to_string).unwrap_or(s)))
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(UnlabeledCorpus::new(source_tag, lines))
    }

    pub fn from_dataset(dataset: &LabeledDataset, source_tag: impl Into<String>) -> Self {
        UnlabeledCorpus::new(source_tag, dataset.texts().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Samples `min(n, len)` lines without replacement; selected lines keep
/// their original relative order.
pub fn subsample(corpus: &UnlabeledCorpus, n: usize, seed: u64) -> UnlabeledCorpus {
    let tag = format!("{}[{}@{}]", corpus.source_tag, n, seed);
    if n >= corpus.len() {
        return UnlabeledCorpus::new(tag, corpus.lines.clone());
    }
    let mut rng = seeded_rng(seed);
    let mut picked = index::sample(&mut rng, corpus.len(), n).into_vec();
    picked.sort_unstable();
    UnlabeledCorpus::new(tag, picked.into_iter().map(|i| corpus.lines[i].clone()).collect())
}
