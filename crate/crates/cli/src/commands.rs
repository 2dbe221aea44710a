use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use germfeed::adapt::{
    adaptation_matrix, continue_pretraining, mlm_mask, AdaptInputs, AdaptPlan, MaskingConfig, IGNORE,
};
use germfeed::corpus::{class_distribution, clean, parse_tsv, write_tsv, ParseMode, UnlabeledCorpus};
use germfeed::harness::{
    base_provenance, compare_to_baseline, corpus_hash, render_test_table, run_cv, run_test_eval, ExperimentConfig,
    ResultRecord, ResultStore, MICRO_F1,
};
use germfeed::normalize::{normalize, normalize_dataset};
use germfeed::stats::{compute_stats, CorpusStats};
use germfeed::stattest::DEFAULT_ALPHA;
use germfeed::textmodel::{
    attach_pretrained, load_model, load_vectors, save_model, save_vectors, train_supervised, train_unsupervised,
    EmbeddingConfig, TrainConfig,
};
use germfeed::{CasingMode, LabeledDataset, RuleSet, SplitName, Task};

use crate::args::*;
use crate::error::CliError;
use crate::settings::{keys_help, ConfigFile};

type CliResult<T = ()> = Result<T, CliError>;

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path.display(), e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display(), e))
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn out_err(e: io::Error) -> CliError {
    CliError::Internal(format!("writing output: {e}"))
}

fn read_split(path: &Path, split: SplitName) -> CliResult<LabeledDataset> {
    let parsed = parse_tsv(open(path)?, split, ParseMode::Strict)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(parsed.dataset)
}

fn read_lines(path: &Path, tag: &str) -> CliResult<UnlabeledCorpus> {
    UnlabeledCorpus::read(open(path)?, tag).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_flag<T: std::str::FromStr>(value: &str, what: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn casing(args: &CasingArgs) -> CasingMode {
    if args.cased {
        CasingMode::Cased
    } else {
        CasingMode::Lowercased
    }
}

fn timestamp(args: &RecordArgs) -> u64 {
    args.timestamp
        .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn append_records(args: &RecordArgs, file: &ConfigFile, records: &[ResultRecord]) -> CliResult {
    let store: Option<std::path::PathBuf> = file.pick_opt(args.store.clone(), "store")?;
    if let Some(path) = store {
        ResultStore::open(&path).append(records)?;
        eprintln!("appended {} record(s) to {}", records.len(), path.display());
    }
    Ok(())
}

fn resolve_task(flag: Option<&str>, file: &ConfigFile) -> CliResult<Task> {
    let value: Option<String> = file.pick_opt(flag.map(str::to_string), "subtask")?;
    let value = value.ok_or_else(|| CliError::Usage("--subtask (A or B) is required".into()))?;
    parse_flag(&value, "--subtask")
}

fn resolve_train(args: &ModelArgs, file: &ConfigFile) -> CliResult<(Task, TrainConfig)> {
    let task = resolve_task(args.subtask.as_deref(), file)?;
    let d = TrainConfig::default();
    let minn = file.pick(args.minn, "minn", 0usize)?;
    let maxn = file.pick(args.maxn, "maxn", minn)?;
    let loss: String = file.pick(args.loss.clone(), "loss", d.loss.to_string())?;
    let casing: String = file.pick(args.casing.clone(), "casing", d.casing.to_string())?;
    let mut config = TrainConfig {
        dim: file.pick(args.dim, "dim", d.dim)?,
        lr: file.pick(args.lr, "lr", d.lr)?,
        epochs: file.pick(args.epochs, "epochs", d.epochs)?,
        word_ngrams: file.pick(args.word_ngrams, "word_ngrams", d.word_ngrams)?,
        loss: parse_flag(&loss, "loss")?,
        threads: file.pick(args.threads, "threads", d.threads)?,
        seed: file.pick(args.seed, "seed", d.seed)?,
        min_count: file.pick(args.min_count, "min_count", d.min_count)?,
        bucket_count: file.pick(args.bucket, "bucket", d.bucket_count)?,
        subword_range: (minn > 0).then_some((minn, maxn)),
        casing: parse_flag(&casing, "casing")?,
        ..d
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(path) = &args.pretrained {
        let vectors = load_vectors(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        config = attach_pretrained(&config, vectors, path.display().to_string())?;
    }
    Ok((task, config))
}

fn resolve_plan(args: &PlanArgs) -> CliResult<Option<AdaptPlan>> {
    if args.plan.is_none() && args.set.is_empty() {
        return Ok(None);
    }
    let mut plan = match &args.plan {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
            AdaptPlan::from_kv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => AdaptPlan::default(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        plan.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Some(plan))
}

fn adapt_inputs(args: &PlanArgs) -> CliResult<AdaptInputs> {
    let base = match &args.base {
        Some(p) => Some(load_vectors(open(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let corpus = |p: &Option<std::path::PathBuf>, tag: &str| -> CliResult<Option<UnlabeledCorpus>> {
        p.as_ref().map(|p| read_lines(p, tag)).transpose()
    };
    Ok(AdaptInputs {
        base,
        task_corpus: corpus(&args.task_corpus, "task")?,
        domain_corpus: corpus(&args.domain_corpus, "domain")?,
    })
}

pub fn dispatch(cli: Cli) -> CliResult {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a, &file),
        Command::Pretrain(a) => pretrain(a),
        Command::Adapt(a) => adapt(a, &file),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a, &file),
        Command::Cv(a) => cv(a, &file),
        Command::Compare(a) => compare(a, &file),
        Command::Mask(a) => mask(a),
        Command::ConfigKeys => {
            print!("{}", keys_help());
            Ok(())
        }
    }
}

fn ingest(a: IngestArgs) -> CliResult {
    let split: SplitName = parse_flag(&a.split, "--split")?;
    let mode = if a.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let parsed = parse_tsv(open(&a.input)?, split, mode)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    for r in &parsed.rejected {
        eprintln!("skipped: {r}");
    }
    let mut ds = parsed.dataset;
    if a.clean {
        let before = ds.len();
        ds = clean(&ds);
        eprintln!("cleaning removed {} document(s)", before - ds.len());
    }
    let mut out = io::stdout().lock();
    writeln!(out, "split={split}").map_err(out_err)?;
    writeln!(out, "documents={}", ds.len()).map_err(out_err)?;
    for task in [Task::Relevance, Task::Sentiment] {
        match class_distribution(&ds, task) {
            Ok(dist) => {
                for (class, n) in &dist.counts {
                    writeln!(out, "{task}.{class}={n}").map_err(out_err)?;
                }
            }
            Err(e) => eprintln!("no {task} distribution: {e}"),
        }
    }
    if let Some(path) = &a.output {
        let mut w = create(path)?;
        write_tsv(&ds, &mut w)?;
        w.flush().map_err(|e| CliError::io(path.display(), e))?;
    }
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> CliResult {
    let ruleset = match &a.rules {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
            RuleSet::from_rules_text(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
        }
        None => RuleSet::standard(casing(&a.casing)),
    };
    eprintln!("rule set id {}", ruleset.id());
    let mut out = sink(a.output.as_deref())?;
    if a.print_rules {
        out.write_all(ruleset.to_rules_text().as_bytes()).map_err(out_err)?;
        return out.flush().map_err(out_err);
    }
    if a.lines {
        for line in open(&a.input)?.lines() {
            let line = line.map_err(|e| CliError::io(a.input.display(), e))?;
            writeln!(out, "{}", normalize(&line, &ruleset)).map_err(out_err)?;
        }
    } else {
        let ds = read_split(&a.input, SplitName::Custom)?;
        write_tsv(&normalize_dataset(&ds, &ruleset), &mut out)?;
    }
    out.flush().map_err(out_err)
}

fn stats(a: StatsArgs) -> CliResult {
    let texts: Vec<String> = if a.lines {
        read_lines(&a.input, "stats")?.lines
    } else {
        read_split(&a.input, SplitName::Custom)?
            .documents
            .into_iter()
            .map(|d| d.text)
            .collect()
    };
    let texts: Vec<String> = if a.normalize {
        let ruleset = RuleSet::standard(casing(&a.casing));
        texts.iter().map(|t| normalize(t, &ruleset)).collect()
    } else if a.casing.lowercase {
        texts.iter().map(|t| t.to_lowercase()).collect()
    } else {
        texts
    };
    let s = compute_stats(texts.iter().map(String::as_str));
    let subset = a.subset.unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let mut out = io::stdout().lock();
    if a.kv {
        write!(out, "{}", s.key_values(&subset)).map_err(out_err)
    } else {
        writeln!(out, "{}\n{}", CorpusStats::table_header(), s.table_row(&subset)).map_err(out_err)
    }
}

fn train(a: TrainArgs, file: &ConfigFile) -> CliResult {
    let (task, config) = resolve_train(&a.model, file)?;
    let training = read_split(&a.train, SplitName::Training)?;
    let development = match &a.dev {
        Some(p) => read_split(p, SplitName::Development)?,
        None => LabeledDataset::new(SplitName::Development, Vec::new()),
    };
    let mut tests = Vec::new();
    if let Some(p) = &a.test_syn {
        tests.push(read_split(p, SplitName::TestSyn)?);
    }
    if let Some(p) = &a.test_dia {
        tests.push(read_split(p, SplitName::TestDia)?);
    }
    let id: String = file.pick(a.record.id.clone(), "id", format!("{task}-baseline"))?;
    let experiment = ExperimentConfig {
        id: id.clone(),
        task,
        train: config.clone(),
        adapt: None,
        k: 5,
        fold_seed: 0,
    };

    let (model, records) = if tests.is_empty() {
        let ds = normalize_dataset(
            &training.concat(&development, SplitName::Custom),
            &RuleSet::standard(config.casing),
        );
        (train_supervised(&ds, task, &config)?, Vec::new())
    } else {
        let test_refs: Vec<&LabeledDataset> = tests.iter().collect();
        let outcome = run_test_eval(&experiment, &training, &development, &test_refs, &AdaptInputs::default())?;
        let mut named: Vec<(&str, &LabeledDataset)> = vec![("training", &training), ("development", &development)];
        for t in &tests {
            named.push((t.split_name.as_str(), t));
        }
        let provenance = base_provenance(&experiment, &named, &AdaptInputs::default());
        let mut out = io::stdout().lock();
        for (split, report) in &outcome.reports {
            let line = serde_json::json!({
                "config_id": id,
                "split": split.as_str(),
                "micro_f1": report.micro_f1,
                "n": report.n,
            });
            writeln!(out, "{line}").map_err(out_err)?;
            eprintln!("{split}: micro-F1 {:.2}", 100.0 * report.micro_f1);
        }
        let records = outcome.records(&id, timestamp(&a.record), &provenance);
        (outcome.model, records)
    };
    eprintln!(
        "trained on {} documents, {} words, labels {:?}",
        training.len() + development.len(),
        model.vocab.n_words(),
        model.labels
    );
    if let Some(path) = &a.output {
        let mut w = create(path)?;
        save_model(&model, &mut w)?;
        w.flush().map_err(|e| CliError::io(path.display(), e))?;
        eprintln!("model written to {}", path.display());
    }
    append_records(&a.record, file, &records)
}

fn pretrain(a: PretrainArgs) -> CliResult {
    let corpus = read_lines(&a.input, "pretrain")?;
    let lines: Vec<String> = if a.normalize {
        let ruleset = RuleSet::standard(CasingMode::Lowercased);
        corpus.lines.iter().map(|l| normalize(l, &ruleset)).collect()
    } else {
        corpus.lines
    };
    let config = EmbeddingConfig {
        model: parse_flag(&a.model, "--model")?,
        dim: a.dim,
        lr: a.lr,
        epochs: a.epochs,
        window: a.window,
        negatives: a.negatives,
        min_count: a.min_count,
        bucket_count: a.bucket,
        subword_range: (a.minn > 0).then_some((a.minn, a.maxn)),
        sampling_threshold: (a.sampling > 0.0).then_some(a.sampling),
        seed: a.seed,
        ..EmbeddingConfig::default()
    };
    let vectors = train_unsupervised(lines.iter().map(String::as_str), &config, None)?;
    let mut w = create(&a.output)?;
    save_vectors(&vectors.table, &vectors.vocab, &mut w)?;
    w.flush().map_err(|e| CliError::io(a.output.display(), e))?;
    eprintln!("{} vectors of dimension {} written", vectors.vocab.n_words(), a.dim);
    Ok(())
}

fn adapt(a: AdaptArgs, file: &ConfigFile) -> CliResult {
    let mut out = io::stdout().lock();
    if a.list_matrix {
        for plan in adaptation_matrix() {
            writeln!(out, "# {}\n{}", plan.label(), plan.to_kv()).map_err(out_err)?;
        }
        return Ok(());
    }
    let plan = resolve_plan(&a.plan)?.ok_or_else(|| CliError::Usage("--plan or --set is required".into()))?;
    if a.dry_run {
        return writeln!(out, "# {}\n{}", plan.label(), plan.to_kv()).map_err(out_err);
    }
    let inputs = adapt_inputs(&a.plan)?;
    let base = inputs
        .base
        .as_ref()
        .ok_or_else(|| CliError::Usage("--base vectors are required".into()))?;
    let (vectors, provenance) =
        continue_pretraining(&plan, base, inputs.task_corpus.as_ref(), inputs.domain_corpus.as_ref())?;
    let mut w = create(&a.output)?;
    save_vectors(&vectors.table, &vectors.vocab, &mut w)?;
    w.flush().map_err(|e| CliError::io(a.output.display(), e))?;
    writeln!(out, "{}", serde_json::to_string(&provenance).map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(out_err)?;

    let mut prov: BTreeMap<String, String> = provenance.to_map();
    if let Some(c) = &inputs.task_corpus {
        prov.insert("hash.task_corpus".into(), corpus_hash(c));
    }
    if let Some(c) = &inputs.domain_corpus {
        prov.insert("hash.domain_corpus".into(), corpus_hash(c));
    }
    let id: String = file.pick(a.record.id.clone(), "id", plan.label())?;
    let record = ResultRecord {
        config_id: id,
        timestamp: timestamp(&a.record),
        split: "adapt".into(),
        metric: "vocabulary_size".into(),
        value: provenance.final_words as f64,
        fold: None,
        provenance: prov,
    };
    append_records(&a.record, file, &[record])
}

fn predict(a: PredictArgs) -> CliResult {
    let model = load_model(open(&a.model)?).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let reader: Box<dyn BufRead> = match &a.input {
        Some(p) => Box::new(open(p)?),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("reading input: {e}")))?;
        match model.predict(&line, a.k) {
            Ok(ranked) => {
                let cells: Vec<String> = ranked.iter().map(|(l, p)| format!("{l}\t{p:.6}")).collect();
                writeln!(out, "{}", cells.join("\t")).map_err(out_err)?;
            }
            Err(germfeed::Error::EmptyInput) => {
                eprintln!("line {}: nothing left after normalization", idx + 1);
                writeln!(out).map_err(out_err)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.flush().map_err(out_err)
}

fn evaluate(a: EvaluateArgs, file: &ConfigFile) -> CliResult {
    let model = load_model(open(&a.model)?).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let task = match file.pick_opt(a.subtask.clone(), "subtask")? {
        Some(s) => parse_flag(&s, "--subtask")?,
        None if model
            .labels
            .iter()
            .all(|l| Task::Relevance.classes().contains(&l.as_str())) =>
        {
            Task::Relevance
        }
        None => Task::Sentiment,
    };
    let split: SplitName = parse_flag(&a.split, "--split")?;
    let ds = read_split(&a.input, split)?;
    let report = model.evaluate(&normalize_dataset(&ds, &model.ruleset), task)?;
    print!("{report}");
    let id: String = file.pick(a.record.id.clone(), "id", a.model.display().to_string())?;
    let mut provenance = BTreeMap::new();
    provenance.insert("model".to_string(), a.model.display().to_string());
    provenance.insert(format!("hash.{split}"), germfeed::harness::dataset_hash(&ds));
    provenance.insert("ruleset_id".into(), model.ruleset.id());
    let record = ResultRecord {
        config_id: id,
        timestamp: timestamp(&a.record),
        split: split.to_string(),
        metric: MICRO_F1.into(),
        value: report.micro_f1,
        fold: None,
        provenance,
    };
    append_records(&a.record, file, &[record])
}

fn cv(a: CvArgs, file: &ConfigFile) -> CliResult {
    let (task, train) = resolve_train(&a.model, file)?;
    let plan = resolve_plan(&a.plan)?;
    let default_id = format!("{task}-{}", plan.as_ref().map_or("baseline".to_string(), AdaptPlan::label));
    let experiment = ExperimentConfig {
        id: file.pick(a.record.id.clone(), "id", default_id)?,
        task,
        train,
        adapt: plan,
        k: file.pick(a.k, "k", 5)?,
        fold_seed: file.pick(a.fold_seed, "fold_seed", 0)?,
    };
    let dataset = read_split(&a.train, SplitName::Training)?;
    let inputs = adapt_inputs(&a.plan)?;
    let outcome = run_cv(&experiment, &dataset, &inputs)?;
    let report = &outcome.report;
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(report).map_err(|e| CliError::Internal(e.to_string()))?)
        .map_err(out_err)?;
    eprintln!(
        "{}: micro-F1 {:.1} ± {:.1} over {} folds",
        report.config_id,
        100.0 * report.mean,
        100.0 * report.std,
        report.fold_scores.len()
    );
    let mut provenance = base_provenance(&experiment, &[("training", &dataset)], &inputs);
    if let Some(p) = &outcome.adapt {
        provenance.extend(p.to_map());
    }
    append_records(&a.record, file, &report.records(timestamp(&a.record), &provenance))
}

fn compare(a: CompareArgs, file: &ConfigFile) -> CliResult {
    let records = ResultStore::open(&a.store).read_all()?;
    let candidates: Vec<&str> = a.candidates.iter().map(String::as_str).collect();
    let mut out = io::stdout().lock();
    if a.test {
        let mut ids = vec![a.baseline.as_str()];
        ids.extend(&candidates);
        return write!(out, "{}", render_test_table(&records, &ids)).map_err(out_err);
    }
    let alpha = file.pick(a.alpha, "alpha", DEFAULT_ALPHA)?;
    let cmp = compare_to_baseline(&records, &a.baseline, &candidates, alpha)?;
    write!(out, "{}", cmp.render()).map_err(out_err)
}

const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

fn mask(a: MaskArgs) -> CliResult {
    let corpus = read_lines(&a.input, "mask")?;
    let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    let mut index: std::collections::HashMap<String, u32> =
        vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let sequences: Vec<Vec<u32>> = corpus
        .lines
        .iter()
        .map(|line| {
            let mut ids = vec![2];
            for tok in line.split_whitespace() {
                let next = vocab.len() as u32;
                let id = *index.entry(tok.to_string()).or_insert_with(|| {
                    vocab.push(tok.to_string());
                    next
                });
                ids.push(id);
            }
            ids.push(3);
            ids
        })
        .collect();
    let mut config = MaskingConfig::new(a.mask_prob, 4, vocab.len() as u32, a.seed);
    config.special_token_ids.extend([0, 1, 2, 3]);
    let batch = mlm_mask(&sequences, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let tally = batch.tally(&sequences, &config);
    let summary = format!(
        "eligible={} selected={} masked={} random={} kept={}",
        tally.eligible, tally.selected, tally.masked, tally.random, tally.kept
    );
    let mut out = BufWriter::new(io::stdout().lock());
    if a.summary {
        writeln!(out, "{summary}").map_err(out_err)?;
        return out.flush().map_err(out_err);
    }
    eprintln!("{summary}");
    for (ids, labels) in batch.input_ids.iter().zip(&batch.labels) {
        let tokens: Vec<&str> = ids.iter().map(|&i| vocab[i as usize].as_str()).collect();
        let targets: Vec<Option<&str>> = labels
            .iter()
            .map(|&l| (l != IGNORE).then(|| vocab[l as usize].as_str()))
            .collect();
        let line = serde_json::json!({ "tokens": tokens, "targets": targets });
        writeln!(out, "{line}").map_err(out_err)?;
    }
    out.flush().map_err(out_err)
}
