//! Continued-pretraining plans and their execution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::expand::{expand_vocab, DEFAULT_MAX_NEW};
use crate::corpus::{subsample, LabeledDataset, Task, UnlabeledCorpus};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::textmodel::{
    attach_pretrained, train_supervised, train_unsupervised, EmbeddingConfig, EmbeddingModel, SupervisedModel,
    TrainConfig, WordVectors,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptSource {
    Domain,
    Task,
    TaskPlusDomain,
}

impl AdaptSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptSource::Domain => "domain",
            AdaptSource::Task => "task",
            AdaptSource::TaskPlusDomain => "task_plus_domain",
        }
    }

    fn needs_task(self) -> bool {
        matches!(self, AdaptSource::Task | AdaptSource::TaskPlusDomain)
    }

    fn needs_domain(self) -> bool {
        matches!(self, AdaptSource::Domain | AdaptSource::TaskPlusDomain)
    }
}

impl FromStr for AdaptSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domain" => Ok(AdaptSource::Domain),
            "task" => Ok(AdaptSource::Task),
            "task_plus_domain" | "task+domain" => Ok(AdaptSource::TaskPlusDomain),
            other => Err(Error::invalid(format!("unknown adapt source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptPlan {
    pub source: AdaptSource,
    /// Number of domain lines to sample; `None` uses all of them.
    pub domain_subset: Option<usize>,
    /// Fraction of CBOW targets hidden from context.
    pub mask_prob: f64,
    pub expand_vocab: bool,
    pub max_new_words: usize,
    pub epochs: usize,
    pub max_seq_len: usize,
    pub lr: f64,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub seed: u64,
    pub subsample_seed: u64,
}

impl Default for AdaptPlan {
    fn default() -> Self {
        AdaptPlan {
            source: AdaptSource::Domain,
            domain_subset: None,
            mask_prob: 0.15,
            expand_vocab: false,
            max_new_words: DEFAULT_MAX_NEW,
            epochs: 5,
            max_seq_len: 512,
            lr: 0.05,
            window: 5,
            negatives: 5,
            min_count: 1,
            seed: 0,
            subsample_seed: 0,
        }
    }
}

const PLAN_KEYS: [&str; 13] = [
    "source",
    "domain_subset",
    "mask_prob",
    "expand_vocab",
    "max_new_words",
    "epochs",
    "max_seq_len",
    "lr",
    "window",
    "negatives",
    "min_count",
    "seed",
    "subsample_seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value {value:?} for {key}")))
}

impl AdaptPlan {
    /// Row label in the style of the adaptation results table.
    pub fn label(&self) -> String {
        let subset = match self.domain_subset {
            Some(n) if n % 1000 == 0 => format!(" ({}K)", n / 1000),
            Some(n) => format!(" ({n})"),
            None => String::new(),
        };
        let mut label = match self.source {
            AdaptSource::Domain => format!("Domain{subset}"),
            AdaptSource::Task => "Task".to_string(),
            AdaptSource::TaskPlusDomain => format!("Task + Domain{subset}"),
        };
        if self.expand_vocab {
            label.push_str(" + Vocab");
        }
        if (self.mask_prob - 0.15).abs() > 1e-12 {
            label.push_str(&format!(" + {}% Mask", (self.mask_prob * 100.0).round()));
        }
        label
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::invalid("mask_prob must lie in [0, 1]"));
        }
        if self.domain_subset == Some(0) {
            return Err(Error::invalid("domain_subset must be positive or \"all\""));
        }
        if self.max_seq_len == 0 {
            return Err(Error::invalid("max_seq_len must be positive"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let subset = self.domain_subset.map_or("all".to_string(), |n| n.to_string());
        let values = [
            self.source.as_str().to_string(),
            subset,
            self.mask_prob.to_string(),
            self.expand_vocab.to_string(),
            self.max_new_words.to_string(),
            self.epochs.to_string(),
            self.max_seq_len.to_string(),
            self.lr.to_string(),
            self.window.to_string(),
            self.negatives.to_string(),
            self.min_count.to_string(),
            self.seed.to_string(),
            self.subsample_seed.to_string(),
        ];
        PLAN_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Parses `key=value` lines; `#` starts a comment, unknown keys are
    /// errors and missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut plan = AdaptPlan::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::record(idx + 1, "expected key=value"))?;
            plan.set(key.trim(), value.trim())
                .map_err(|e| Error::record(idx + 1, e.to_string()))?;
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "source" => self.source = value.parse()?,
            "domain_subset" => {
                self.domain_subset = if value == "all" {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "mask_prob" => self.mask_prob = parse_value(key, value)?,
            "expand_vocab" => self.expand_vocab = parse_value(key, value)?,
            "max_new_words" => self.max_new_words = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "max_seq_len" => self.max_seq_len = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "negatives" => self.negatives = parse_value(key, value)?,
            "min_count" => self.min_count = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "subsample_seed" => self.subsample_seed = parse_value(key, value)?,
            other => return Err(Error::invalid(format!("unknown plan key {other:?}"))),
        }
        Ok(())
    }

    fn embedding_config(&self, dim: usize) -> EmbeddingConfig {
        EmbeddingConfig {
            model: EmbeddingModel::Cbow,
            dim,
            lr: self.lr,
            epochs: self.epochs,
            window: self.window,
            negatives: self.negatives,
            min_count: self.min_count,
            context_mask: Some(self.mask_prob),
            max_seq_len: Some(self.max_seq_len),
            seed: self.seed,
            extend_vocab: false,
            ..EmbeddingConfig::default()
        }
    }
}

impl fmt::Display for AdaptPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The adaptation grid: domain and task sources, task plus 100K/200K
/// domain subsets, each with and without the 30% mask analog, and the
/// vocabulary-expansion variants of the domain source.
pub fn adaptation_matrix() -> Vec<AdaptPlan> {
    let base = AdaptPlan::default();
    let with = |source, subset, vocab, mask| AdaptPlan {
        source,
        domain_subset: subset,
        expand_vocab: vocab,
        mask_prob: mask,
        ..base.clone()
    };
    vec![
        with(AdaptSource::Domain, None, false, 0.15),
        with(AdaptSource::Domain, None, false, 0.30),
        with(AdaptSource::Domain, None, true, 0.15),
        with(AdaptSource::Domain, None, true, 0.30),
        with(AdaptSource::Task, None, false, 0.15),
        with(AdaptSource::Task, None, false, 0.30),
        with(AdaptSource::TaskPlusDomain, Some(100_000), false, 0.15),
        with(AdaptSource::TaskPlusDomain, Some(100_000), false, 0.30),
        with(AdaptSource::TaskPlusDomain, Some(200_000), false, 0.15),
        with(AdaptSource::TaskPlusDomain, Some(200_000), false, 0.30),
    ]
}

/// What a continued-pretraining run consumed and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptProvenance {
    pub label: String,
    pub source: AdaptSource,
    pub domain_subset: Option<usize>,
    pub domain_tag: Option<String>,
    pub task_tag: Option<String>,
    pub training_lines: usize,
    pub mask_prob: f64,
    pub expand_vocab: bool,
    pub new_words: usize,
    pub epochs: usize,
    pub max_seq_len: usize,
    pub seed: u64,
    pub subsample_seed: u64,
    pub base_words: usize,
    pub final_words: usize,
}

impl AdaptProvenance {
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        BTreeMap::from([
            ("adapt_label".into(), self.label.clone()),
            ("adapt_source".into(), self.source.as_str().into()),
            (
                "domain_subset".into(),
                self.domain_subset.map_or("all".into(), |n| n.to_string()),
            ),
            ("domain_corpus".into(), opt(&self.domain_tag)),
            ("task_corpus".into(), opt(&self.task_tag)),
            ("training_lines".into(), self.training_lines.to_string()),
            ("mask_prob".into(), self.mask_prob.to_string()),
            ("expand_vocab".into(), self.expand_vocab.to_string()),
            ("new_words".into(), self.new_words.to_string()),
            ("adapt_epochs".into(), self.epochs.to_string()),
            ("max_seq_len".into(), self.max_seq_len.to_string()),
            ("adapt_seed".into(), self.seed.to_string()),
            ("subsample_seed".into(), self.subsample_seed.to_string()),
            ("base_words".into(), self.base_words.to_string()),
            ("final_words".into(), self.final_words.to_string()),
        ])
    }
}

/// Builds the plan's training corpus, optionally expands the vocabulary,
/// then continues CBOW training from `base`. Corpora are used as given
/// (whitespace tokenization only).
pub fn continue_pretraining(
    plan: &AdaptPlan,
    base: &WordVectors,
    task_corpus: Option<&UnlabeledCorpus>,
    domain_corpus: Option<&UnlabeledCorpus>,
) -> Result<(WordVectors, AdaptProvenance)> {
    plan.validate()?;
    let task = match (plan.source.needs_task(), task_corpus) {
        (true, Some(c)) if !c.is_empty() => Some(c),
        (true, _) => return Err(Error::invalid(format!("plan {:?} needs a task corpus", plan.label()))),
        (false, _) => None,
    };
    let domain = match (plan.source.needs_domain(), domain_corpus) {
        (true, Some(c)) if !c.is_empty() => Some(match plan.domain_subset {
            Some(n) => subsample(c, n, plan.subsample_seed),
            None => c.clone(),
        }),
        (true, _) => return Err(Error::invalid(format!("plan {:?} needs a domain corpus", plan.label()))),
        (false, _) => None,
    };
    let lines: Vec<&str> = task
        .iter()
        .flat_map(|c| c.lines.iter())
        .chain(domain.iter().flat_map(|c| c.lines.iter()))
        .map(String::as_str)
        .collect();

    let mut start = base.clone();
    let mut new_words = 0;
    if plan.expand_vocab {
        let (vocab, table) = expand_vocab(
            &base.vocab,
            &base.table,
            lines.iter().copied(),
            plan.max_new_words,
            plan.seed,
        );
        new_words = vocab.n_words() - base.vocab.n_words();
        start = WordVectors { vocab, table };
    }
    let config = plan.embedding_config(base.table.dim());
    let adapted = train_unsupervised(lines.iter().copied(), &config, Some(&start))?;
    let provenance = AdaptProvenance {
        label: plan.label(),
        source: plan.source,
        domain_subset: plan.domain_subset,
        domain_tag: domain.as_ref().map(|c| c.source_tag.clone()),
        task_tag: task.map(|c| c.source_tag.clone()),
        training_lines: lines.len(),
        mask_prob: plan.mask_prob,
        expand_vocab: plan.expand_vocab,
        new_words,
        epochs: plan.epochs,
        max_seq_len: plan.max_seq_len,
        seed: plan.seed,
        subsample_seed: plan.subsample_seed,
        base_words: base.vocab.n_words(),
        final_words: adapted.vocab.n_words(),
    };
    Ok((adapted, provenance))
}

/// Inputs shared by every adaptation run.
#[derive(Debug, Clone, Default)]
pub struct AdaptInputs {
    pub base: Option<WordVectors>,
    pub task_corpus: Option<UnlabeledCorpus>,
    pub domain_corpus: Option<UnlabeledCorpus>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub model: SupervisedModel,
    pub report: EvalReport,
    pub provenance: Option<AdaptProvenance>,
}

/// Continued pretraining, then supervised training initialized from the
/// adapted vectors, then evaluation. Without a plan this is exactly the
/// baseline run.
pub fn whole_pipeline_adapt_then_finetune(
    plan: Option<&AdaptPlan>,
    inputs: &AdaptInputs,
    train: &LabeledDataset,
    eval: &LabeledDataset,
    task: Task,
    config: &TrainConfig,
) -> Result<PipelineOutcome> {
    let (config, provenance) = match plan {
        None => (config.clone(), None),
        Some(plan) => {
            let base = inputs
                .base
                .as_ref()
                .ok_or_else(|| Error::invalid("an adaptation plan needs base vectors"))?;
            let (vectors, prov) =
                continue_pretraining(plan, base, inputs.task_corpus.as_ref(), inputs.domain_corpus.as_ref())?;
            (attach_pretrained(config, vectors, plan.label())?, Some(prov))
        }
    };
    let model = train_supervised(train, task, &config)?;
    let report = model.evaluate(eval, task)?;
    Ok(PipelineOutcome {
        model,
        report,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, SplitName};
    use crate::seeded_rng;
    use crate::textmodel::{EmbeddingTable, Vocabulary};

    fn base(dim: usize) -> WordVectors {
        let words: Vec<String> = ["zug", "bahn", "verspätung", "gut", "schlecht"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let n = words.len();
        let vocab = Vocabulary::from_parts(words, vec![1; n], 0, 1, None);
        WordVectors {
            vocab,
            table: EmbeddingTable::random(n, 0, dim, &mut seeded_rng(1)),
        }
    }

    fn corpus(tag: &str, n: usize) -> UnlabeledCorpus {
        let lines = (0..n)
            .map(|i| format!("zug bahn {} neu{} gut", ["verspätung", "schlecht"][i % 2], i % 13))
            .collect();
        UnlabeledCorpus::new(tag, lines)
    }

    fn small(plan: AdaptPlan) -> AdaptPlan {
        AdaptPlan {
            epochs: 2,
            window: 2,
            ..plan
        }
    }

    #[test]
    fn matrix_labels() {
        let labels: Vec<String> = adaptation_matrix().iter().map(AdaptPlan::label).collect();
        assert_eq!(
            labels,
            [
                "Domain",
                "Domain + 30% Mask",
                "Domain + Vocab",
                "Domain + Vocab + 30% Mask",
                "Task",
                "Task + 30% Mask",
                "Task + Domain (100K)",
                "Task + Domain (100K) + 30% Mask",
                "Task + Domain (200K)",
                "Task + Domain (200K) + 30% Mask",
            ]
        );
    }

    #[test]
    fn kv_round_trip_and_unknown_keys() {
        for plan in adaptation_matrix() {
            assert_eq!(AdaptPlan::from_kv(&plan.to_kv()).unwrap(), plan);
        }
        assert!(AdaptPlan::from_kv("sorce=task\n").is_err());
        assert!(AdaptPlan::from_kv("mask_prob=1.5\n").is_err());
        let p = AdaptPlan::from_kv("# comment\nsource = task # inline\n\nepochs=3").unwrap();
        assert_eq!((p.source, p.epochs), (AdaptSource::Task, 3));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let b = base(6);
        let plan = AdaptPlan {
            epochs: 0,
            ..AdaptPlan::default()
        };
        let (out, _) = continue_pretraining(&plan, &b, None, Some(&corpus("d", 10))).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn missing_corpus_is_an_error() {
        let b = base(6);
        let plan = AdaptPlan {
            source: AdaptSource::TaskPlusDomain,
            ..AdaptPlan::default()
        };
        assert!(continue_pretraining(&plan, &b, Some(&corpus("t", 5)), None).is_err());
        assert!(continue_pretraining(&plan, &b, None, Some(&corpus("d", 5))).is_err());
        let task_only = AdaptPlan {
            source: AdaptSource::Task,
            ..AdaptPlan::default()
        };
        assert!(continue_pretraining(&task_only, &b, None, Some(&corpus("d", 5))).is_err());
    }

    #[test]
    fn deterministic_and_subsampled() {
        let b = base(6);
        let plan = small(AdaptPlan {
            source: AdaptSource::TaskPlusDomain,
            domain_subset: Some(20),
            ..AdaptPlan::default()
        });
        let (t, d) = (corpus("t", 30), corpus("d", 100));
        let (a, pa) = continue_pretraining(&plan, &b, Some(&t), Some(&d)).unwrap();
        let (c, pc) = continue_pretraining(&plan, &b, Some(&t), Some(&d)).unwrap();
        assert_eq!(a, c);
        assert_eq!(pa, pc);
        assert_eq!(pa.training_lines, 50);
        assert_ne!(a.table, b.table);
    }

    #[test]
    fn vocabulary_only_grows_when_expanding() {
        let b = base(6);
        let d = corpus("d", 40);
        let plain = small(AdaptPlan::default());
        let (out, prov) = continue_pretraining(&plain, &b, None, Some(&d)).unwrap();
        assert_eq!(out.vocab.n_words(), b.vocab.n_words());
        assert_eq!(prov.new_words, 0);
        let expanding = AdaptPlan {
            expand_vocab: true,
            max_new_words: 5,
            ..plain
        };
        let (out, prov) = continue_pretraining(&expanding, &b, None, Some(&d)).unwrap();
        assert_eq!(prov.new_words, 5);
        assert_eq!(out.vocab.n_words(), b.vocab.n_words() + 5);
        for i in 0..b.vocab.n_words() {
            assert_eq!(out.vocab.id(b.vocab.word(i)), Some(i));
        }
    }

    #[test]
    fn disjoint_corpus_leaves_base_rows_alone() {
        let b = base(6);
        let d = UnlabeledCorpus::new("x", vec!["qq rr ss".into(); 20]);
        let plan = small(AdaptPlan {
            expand_vocab: true,
            ..AdaptPlan::default()
        });
        let (out, _) = continue_pretraining(&plan, &b, None, Some(&d)).unwrap();
        for i in 0..b.vocab.n_words() {
            assert_eq!(out.table.words.row(i), b.table.words.row(i));
        }
    }

    #[test]
    fn no_plan_equals_baseline() {
        let docs: Vec<Document> = (0..20)
            .map(|i| {
                let text = if i % 2 == 0 { "zug verspätung" } else { "zug gut" };
                Document::new(format!("d{i}"), text, Some(i % 2 == 0), None)
            })
            .collect();
        let ds = LabeledDataset::new(SplitName::Custom, docs);
        let cfg = TrainConfig {
            dim: 6,
            bucket_count: 100,
            epochs: 3,
            ..TrainConfig::default()
        };
        let out =
            whole_pipeline_adapt_then_finetune(None, &AdaptInputs::default(), &ds, &ds, Task::Relevance, &cfg).unwrap();
        let baseline = train_supervised(&ds, Task::Relevance, &cfg).unwrap();
        assert_eq!(out.model.input, baseline.input);
        assert_eq!(out.report, baseline.evaluate(&ds, Task::Relevance).unwrap());

        let inputs = AdaptInputs {
            base: Some(base(6)),
            task_corpus: Some(UnlabeledCorpus::from_dataset(&ds, "train")),
            domain_corpus: None,
        };
        let plan = small(AdaptPlan {
            source: AdaptSource::Task,
            ..AdaptPlan::default()
        });
        let a = whole_pipeline_adapt_then_finetune(Some(&plan), &inputs, &ds, &ds, Task::Relevance, &cfg).unwrap();
        let b = whole_pipeline_adapt_then_finetune(Some(&plan), &inputs, &ds, &ds, Task::Relevance, &cfg).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.model.config.pretrained_source.as_deref(), Some("Task"));
    }
}
