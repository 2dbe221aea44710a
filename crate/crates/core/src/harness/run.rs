//! Cross-validation, test-set evaluation and baseline comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::store::{fold_scores, latest_value, ResultRecord, CONFIG_HASH_KEY};
use crate::adapt::{continue_pretraining, AdaptInputs, AdaptPlan, AdaptProvenance};
use crate::corpus::{stratified_kfold, write_tsv, LabeledDataset, SplitName, Task, UnlabeledCorpus};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::normalize::{normalize_dataset, RuleSet};
use crate::stattest::{wilcoxon_rank_sum_alpha, Alternative};
use crate::textmodel::{attach_pretrained, train_supervised, SupervisedModel, TrainConfig};

pub const MICRO_F1: &str = "micro_f1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub task: Task,
    pub train: TrainConfig,
    pub adapt: Option<AdaptPlan>,
    pub k: usize,
    pub fold_seed: u64,
}

impl ExperimentConfig {
    pub fn baseline(id: impl Into<String>, task: Task) -> Self {
        ExperimentConfig {
            id: id.into(),
            task,
            train: TrainConfig::default(),
            adapt: None,
            k: 5,
            fold_seed: 0,
        }
    }

    pub fn ruleset(&self) -> RuleSet {
        RuleSet::standard(self.train.casing)
    }

    /// Content hash of everything except the id.
    pub fn config_hash(&self) -> String {
        let anonymous = ExperimentConfig {
            id: String::new(),
            ..self.clone()
        };
        let json = serde_json::to_vec(&anonymous).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the dataset's TSV serialization.
pub fn dataset_hash(dataset: &LabeledDataset) -> String {
    let mut buf = Vec::new();
    write_tsv(dataset, &mut buf).expect("writing to memory");
    sha256_hex(&buf)
}

pub fn corpus_hash(corpus: &UnlabeledCorpus) -> String {
    let mut hasher = Sha256::new();
    for line in &corpus.lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Seeds, hashes and settings shared by all records of a run.
pub fn base_provenance(
    config: &ExperimentConfig,
    datasets: &[(&str, &LabeledDataset)],
    inputs: &AdaptInputs,
) -> BTreeMap<String, String> {
    let mut p = BTreeMap::new();
    p.insert(CONFIG_HASH_KEY.to_string(), config.config_hash());
    p.insert("task".into(), config.task.to_string());
    p.insert("train_seed".into(), config.train.seed.to_string());
    p.insert("fold_seed".into(), config.fold_seed.to_string());
    p.insert("k".into(), config.k.to_string());
    p.insert("stratified".into(), "true".into());
    p.insert("ruleset_id".into(), config.ruleset().id());
    for (name, ds) in datasets {
        p.insert(format!("hash.{name}"), dataset_hash(ds));
    }
    if let Some(c) = &inputs.task_corpus {
        p.insert("hash.task_corpus".into(), corpus_hash(c));
    }
    if let Some(c) = &inputs.domain_corpus {
        p.insert("hash.domain_corpus".into(), corpus_hash(c));
    }
    if let Some(source) = &config.train.pretrained_source {
        p.insert("pretrained".into(), source.clone());
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub config_id: String,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (k - 1 denominator).
    pub std: f64,
}

pub fn mean_std(scores: &[f64]) -> (f64, f64) {
    if scores.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    if scores.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl CVReport {
    pub fn from_scores(config_id: impl Into<String>, fold_scores: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&fold_scores);
        CVReport {
            config_id: config_id.into(),
            fold_scores,
            mean,
            std,
        }
    }

    pub fn records(&self, timestamp: u64, provenance: &BTreeMap<String, String>) -> Vec<ResultRecord> {
        self.fold_scores
            .iter()
            .enumerate()
            .map(|(fold, &value)| ResultRecord {
                config_id: self.config_id.clone(),
                timestamp,
                split: "cv".into(),
                metric: MICRO_F1.into(),
                value,
                fold: Some(fold),
                provenance: provenance.clone(),
            })
            .collect()
    }
}

/// Adapted training config plus provenance, or the config unchanged.
fn adapted_config(
    config: &ExperimentConfig,
    inputs: &AdaptInputs,
    task_text: &LabeledDataset,
) -> Result<(TrainConfig, Option<AdaptProvenance>)> {
    let Some(plan) = &config.adapt else {
        return Ok((config.train.clone(), None));
    };
    let base = inputs
        .base
        .as_ref()
        .ok_or_else(|| Error::invalid("an adaptation plan needs base vectors"))?;
    let derived;
    let task_corpus = match &inputs.task_corpus {
        Some(c) => c,
        None => {
            derived = UnlabeledCorpus::from_dataset(task_text, "task");
            &derived
        }
    };
    let (vectors, prov) = continue_pretraining(plan, base, Some(task_corpus), inputs.domain_corpus.as_ref())?;
    Ok((attach_pretrained(&config.train, vectors, plan.label())?, Some(prov)))
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: CVReport,
    pub adapt: Option<AdaptProvenance>,
}

/// Stratified k-fold CV on `dataset` (raw text; normalized here). With an
/// adaptation plan, vectors are adapted once and shared by all folds.
pub fn run_cv(config: &ExperimentConfig, dataset: &LabeledDataset, inputs: &AdaptInputs) -> Result<CvOutcome> {
    let ds = normalize_dataset(dataset, &config.ruleset());
    let folds = stratified_kfold(&ds, config.k, config.task, config.fold_seed)?;
    let (train_config, adapt) = adapted_config(config, inputs, &ds)?;
    let mut scores = Vec::with_capacity(folds.len());
    for fold in &folds {
        let (train, validation) = fold.materialize(&ds);
        let model = train_supervised(&train, config.task, &train_config)?;
        scores.push(model.evaluate(&validation, config.task)?.micro_f1);
    }
    Ok(CvOutcome {
        report: CVReport::from_scores(config.id.clone(), scores),
        adapt,
    })
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub model: SupervisedModel,
    pub reports: Vec<(SplitName, EvalReport)>,
    pub adapt: Option<AdaptProvenance>,
}

impl TestOutcome {
    pub fn records(
        &self,
        config_id: &str,
        timestamp: u64,
        provenance: &BTreeMap<String, String>,
    ) -> Vec<ResultRecord> {
        self.reports
            .iter()
            .map(|(split, report)| ResultRecord {
                config_id: config_id.to_string(),
                timestamp,
                split: split.to_string(),
                metric: MICRO_F1.into(),
                value: report.micro_f1,
                fold: None,
                provenance: provenance.clone(),
            })
            .collect()
    }
}

/// Trains on training + development and evaluates every test split.
pub fn run_test_eval(
    config: &ExperimentConfig,
    training: &LabeledDataset,
    development: &LabeledDataset,
    tests: &[&LabeledDataset],
    inputs: &AdaptInputs,
) -> Result<TestOutcome> {
    if tests.is_empty() {
        return Err(Error::invalid("no test split given"));
    }
    let ruleset = config.ruleset();
    let train = normalize_dataset(&training.concat(development, SplitName::Custom), &ruleset);
    let (train_config, adapt) = adapted_config(config, inputs, &train)?;
    let model = train_supervised(&train, config.task, &train_config)?;
    let reports = tests
        .iter()
        .map(|t| {
            let normalized = normalize_dataset(t, &ruleset);
            Ok((t.split_name, model.evaluate(&normalized, config.task)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestOutcome { model, reports, adapt })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub config_id: String,
    pub mean: f64,
    pub std: f64,
    /// One-sided p that the candidate's folds exceed the baseline's.
    pub p_value: Option<f64>,
    pub star: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: ComparisonRow,
    pub rows: Vec<ComparisonRow>,
    pub alpha: f64,
}

/// Rank-sum comparison of each candidate's CV folds against the
/// baseline's, using only stored records.
pub fn compare_to_baseline(
    records: &[ResultRecord],
    baseline_id: &str,
    candidate_ids: &[&str],
    alpha: f64,
) -> Result<Comparison> {
    let base_scores = fold_scores(records, baseline_id, MICRO_F1)?;
    let (mean, std) = mean_std(&base_scores);
    let baseline = ComparisonRow {
        config_id: baseline_id.to_string(),
        mean,
        std,
        p_value: None,
        star: false,
    };
    let rows = candidate_ids
        .iter()
        .map(|id| {
            let scores = fold_scores(records, id, MICRO_F1)?;
            let (mean, std) = mean_std(&scores);
            let test = wilcoxon_rank_sum_alpha(&scores, &base_scores, Alternative::Greater, alpha)?;
            Ok(ComparisonRow {
                config_id: id.to_string(),
                mean,
                std,
                p_value: Some(test.p_one_sided),
                star: test.significant(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { baseline, rows, alpha })
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl Comparison {
    /// Plain-text table: scores as percentages, mean ± std, `*` when the
    /// candidate is significantly better at `alpha`.
    pub fn render(&self) -> String {
        let width = std::iter::once(&self.baseline)
            .chain(&self.rows)
            .map(|r| r.config_id.chars().count())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>8}", "model", "micro-F1", "p");
        for row in std::iter::once(&self.baseline).chain(&self.rows) {
            let score = format!("{} ± {}{}", pct(row.mean), pct(row.std), if row.star { "*" } else { "" });
            let p = row.p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
            let _ = writeln!(out, "{:<width$}  {:>12}  {:>8}", row.config_id, score, p);
        }
        out
    }
}

/// Test-set table with one column per split, from stored records.
pub fn render_test_table(records: &[ResultRecord], config_ids: &[&str]) -> String {
    let splits = [SplitName::TestSyn, SplitName::TestDia];
    let width = config_ids.iter().map(|s| s.chars().count()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}", "model", "synchronic", "diachronic");
    for id in config_ids {
        let cells: Vec<String> = splits
            .iter()
            .map(|s| latest_value(records, id, s.as_str(), MICRO_F1).map_or("-".to_string(), pct))
            .collect();
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}", id, cells[0], cells[1]);
    }
    out
}
