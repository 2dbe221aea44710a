//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one status line, even when everything passes.
//!
//! Criteria that need the public GermEval 2017 files read them from the
//! directory in `GERMEVAL_DIR` (file names starting with `train`, `dev`,
//! `test_syn` and `test_dia`, ending in `.tsv`) and report NOT RUN when it
//! is unset. `GERMEVAL_DOMAIN` optionally points to unlabeled tweet lines
//! for the informational domain-embedding delta.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use germfeed::adapt::{
    adaptation_matrix, continue_pretraining, expand_vocab, mlm_mask, AdaptInputs, AdaptSource, MaskingConfig,
    DEFAULT_MAX_NEW, IGNORE,
};
use germfeed::corpus::{class_distribution, parse_tsv, ParseMode};
use germfeed::harness::{base_provenance, run_cv, run_test_eval, ExperimentConfig};
use germfeed::metrics::{fbeta, micro_scores};
use germfeed::normalize::{normalize, normalize_dataset};
use germfeed::stats::compute_stats;
use germfeed::stattest::{wilcoxon_rank_sum, Alternative, Method};
use germfeed::textmodel::{
    attach_pretrained, build_vocab, softmax_loss_gradients, train_unsupervised, EmbeddingConfig, Matrix,
    VocabConfig, WordVectors,
};
use germfeed::{
    CasingMode, Document, EmbeddingTable, LabeledDataset, RuleSet, Sentiment, SplitName, Task, UnlabeledCorpus,
};

enum Status {
    Pass(String),
    Fail(String),
    NotRun(String),
}

type Outcome = Result<Status, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Status {
    if ok {
        Status::Pass(detail)
    } else {
        Status::Fail(detail)
    }
}

// ---------------------------------------------------------------- data

struct Splits {
    train: LabeledDataset,
    dev: LabeledDataset,
    syn: LabeledDataset,
    dia: LabeledDataset,
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("GERMEVAL_DIR").map(PathBuf::from)
}

fn find_split(dir: &Path, prefix: &str) -> Result<PathBuf, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut hits: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with(prefix) && name.ends_with(".tsv")
        })
        .collect();
    hits.sort();
    hits.into_iter()
        .next()
        .ok_or_else(|| format!("no {prefix}*.tsv in {}", dir.display()))
}

fn load_split(dir: &Path, prefix: &str, name: SplitName) -> Result<LabeledDataset, String> {
    let path = find_split(dir, prefix)?;
    let file = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = parse_tsv(BufReader::new(file), name, ParseMode::Lenient).map_err(|e| e.to_string())?;
    Ok(parsed.dataset)
}

fn load_splits(dir: &Path) -> Result<Splits, String> {
    Ok(Splits {
        train: load_split(dir, "train", SplitName::Training)?,
        dev: load_split(dir, "dev", SplitName::Development)?,
        syn: load_split(dir, "test_syn", SplitName::TestSyn)?,
        dia: load_split(dir, "test_dia", SplitName::TestDia)?,
    })
}

// ------------------------------------------------------- criterion 1

fn ingestion_counts() -> Outcome {
    let Some(dir) = data_dir() else {
        return Ok(Status::NotRun("GERMEVAL_DIR not set".into()));
    };
    let start = Instant::now();
    let s = load_splits(&dir)?;
    let elapsed = start.elapsed().as_secs_f64();

    let expected: [(&LabeledDataset, usize, [usize; 2], [usize; 3]); 4] = [
        (&s.train, 20_941, [17_043, 3_898], [14_497, 5_228, 1_216]),
        (&s.dev, 2_584, [2_049, 535], [1_812, 617, 155]),
        (&s.syn, 2_566, [2_095, 471], [1_681, 780, 105]),
        (&s.dia, 1_842, [1_547, 295], [1_237, 497, 108]),
    ];
    let mut problems = Vec::new();
    for (ds, n, rel, sent) in expected {
        let a = class_distribution(ds, Task::Relevance).map_err(|e| e.to_string())?;
        let b = class_distribution(ds, Task::Sentiment).map_err(|e| e.to_string())?;
        let got_rel = [a.get("true"), a.get("false")];
        let got_sent = [b.get("neutral"), b.get("negative"), b.get("positive")];
        if ds.len() != n || got_rel != rel || got_sent != sent {
            problems.push(format!(
                "{}: n={} rel={got_rel:?} sent={got_sent:?}",
                ds.split_name,
                ds.len()
            ));
        }
    }
    let ok = problems.is_empty() && elapsed < 5.0;
    Ok(check(
        ok,
        if problems.is_empty() {
            format!("all split and class counts exact; {elapsed:.2}s")
        } else {
            format!("{}; {elapsed:.2}s", problems.join("; "))
        },
    ))
}

// ------------------------------------------------------- criterion 2

const TABLE8_IN: &str = "@nordschaf theoretisch kannste dir überall im Kölner Stadtbereich was suchen. Mit der KVB + S-Bahn kommt man überall fix hin.";
const TABLE8_OUT: &str = "twitterusername theoretisch kannste dir überall im Kölner Stadtbereich was suchen Mit der KVB sbahn kommt man überall fix hin";

fn normalization_golden() -> Outcome {
    let cased = RuleSet::standard(CasingMode::Cased);
    let lower = RuleSet::standard(CasingMode::Lowercased);
    let table8 = normalize(TABLE8_IN, &cased);
    if table8 != TABLE8_OUT {
        return Ok(Status::Fail(format!("example sentence gave {table8:?}")));
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/normalize_golden.tsv");
    let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let [casing, input, expected] = cols[..] else {
            return Err(format!("bad golden line {line:?}"));
        };
        let rules = if casing == "cased" { &cased } else { &lower };
        let got = normalize(input, rules);
        cases += 1;
        if got != expected {
            mismatches.push(format!("{input:?} -> {got:?} (want {expected:?})"));
        }
    }
    Ok(check(
        mismatches.is_empty() && cases >= 50,
        if mismatches.is_empty() {
            format!("example sentence byte-exact; {cases} golden cases stable")
        } else {
            mismatches.join("; ")
        },
    ))
}

// ------------------------------------------------------- criterion 3

fn baseline_test_reproduction() -> Outcome {
    let Some(dir) = data_dir() else {
        return Ok(Status::NotRun("GERMEVAL_DIR not set".into()));
    };
    let s = load_splits(&dir)?;
    let targets = [(Task::Relevance, 90.7, 89.6), (Task::Sentiment, 75.8, 74.9)];
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (task, syn_ref, dia_ref) in targets {
        let config = ExperimentConfig::baseline("baseline", task);
        let outcome = run_test_eval(&config, &s.train, &s.dev, &[&s.syn, &s.dia], &AdaptInputs::default())
            .map_err(|e| e.to_string())?;
        let syn = outcome.reports[0].1.micro_f1 * 100.0;
        let dia = outcome.reports[1].1.micro_f1 * 100.0;
        ok &= (syn - syn_ref).abs() <= 1.5 && (dia - dia_ref).abs() <= 1.5;
        parts.push(format!("{task}: syn {syn:.1} (ref {syn_ref}) dia {dia:.1} (ref {dia_ref})"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 300.0;
    Ok(check(ok, format!("{}; {elapsed:.0}s", parts.join("; "))))
}

// ------------------------------------------------------- criterion 4

fn cv_reproduction() -> Outcome {
    let Some(dir) = data_dir() else {
        return Ok(Status::NotRun("GERMEVAL_DIR not set".into()));
    };
    let s = load_splits(&dir)?;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut baseline_b = 0.0;
    for (task, reference, tol) in [(Task::Relevance, 90.5, 1.5), (Task::Sentiment, 77.6, 2.0)] {
        let config = ExperimentConfig::baseline("baseline", task);
        let report = run_cv(&config, &s.train, &AdaptInputs::default())
            .map_err(|e| e.to_string())?
            .report;
        let (mean, std) = (report.mean * 100.0, report.std * 100.0);
        ok &= (mean - reference).abs() <= tol;
        parts.push(format!("{task}: {mean:.1} ± {std:.1} (ref {reference} ± {tol})"));
        if task == Task::Sentiment {
            baseline_b = mean;
        }
    }
    match std::env::var_os("GERMEVAL_DOMAIN") {
        None => parts.push("domain delta not run (GERMEVAL_DOMAIN unset)".into()),
        Some(path) => {
            let file = File::open(&path).map_err(|e| e.to_string())?;
            let corpus = UnlabeledCorpus::read(BufReader::new(file), "domain").map_err(|e| e.to_string())?;
            let rules = RuleSet::standard(CasingMode::Lowercased);
            let lines: Vec<String> = corpus.lines.iter().map(|l| normalize(l, &rules)).collect();
            let vectors = train_unsupervised(lines.iter().map(String::as_str), &EmbeddingConfig::default(), None)
                .map_err(|e| e.to_string())?;
            let mut config = ExperimentConfig::baseline("domain", Task::Sentiment);
            config.train = attach_pretrained(&config.train, vectors, "domain").map_err(|e| e.to_string())?;
            let report = run_cv(&config, &s.train, &AdaptInputs::default())
                .map_err(|e| e.to_string())?
                .report;
            parts.push(format!(
                "domain embeddings on sentiment: {:.1}, delta {:+.1} (informational, ref +0.8)",
                report.mean * 100.0,
                report.mean * 100.0 - baseline_b
            ));
        }
    }
    Ok(check(ok, parts.join("; ")))
}

// ------------------------------------------------------- criterion 5

fn micro_f1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels = ["a", "b", "c", "d", "e"];
    let mut worst_identity = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(2..=labels.len());
        let golds: Vec<&str> = (0..n).map(|_| labels[rng.random_range(0..k)]).collect();
        let preds: Vec<&str> = (0..n).map(|_| labels[rng.random_range(0..k)]).collect();
        let correct = golds.iter().zip(&preds).filter(|(g, p)| g == p).count();
        let accuracy = correct as f64 / n as f64;
        let report = micro_scores(&preds, &golds, &labels[..k]).map_err(|e| e.to_string())?;
        if report.micro_f1 != accuracy || report.micro_precision != accuracy || report.micro_recall != accuracy {
            worst_identity = worst_identity.max((report.micro_f1 - accuracy).abs()).max(f64::MIN_POSITIVE);
        }
    }
    let mut worst_fbeta = 0.0f64;
    for _ in 0..1000 {
        let p: f64 = rng.random();
        let r: f64 = rng.random();
        let beta: f64 = rng.random_range(0.1..5.0);
        let b2 = beta * beta;
        let direct = (1.0 + b2) * p * r / (b2 * p + r);
        worst_fbeta = worst_fbeta.max((fbeta(p, r, beta) - direct).abs());
    }
    Ok(check(
        worst_identity == 0.0 && worst_fbeta <= 1e-12,
        format!("micro-F1 == accuracy on 1000 instances; max |fbeta - direct| = {worst_fbeta:.1e}"),
    ))
}

// ------------------------------------------------------- criterion 6

/// Exact one-sided p-values by enumerating every assignment of ranks
/// 1..=n+m to the first sample.
fn brute_force_p(n: usize, m: usize, observed: usize) -> (f64, f64) {
    let total = n + m;
    let (mut ge, mut le, mut all) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let sum: usize = (0..total).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        all += 1;
        ge += u64::from(sum >= observed);
        le += u64::from(sum <= observed);
    }
    (ge as f64 / all as f64, le as f64 / all as f64)
}

fn wilcoxon_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let mut values: Vec<u32> = (0..1000).collect();
        values.shuffle(&mut rng);
        let x: Vec<f64> = values[..n].iter().map(|&v| f64::from(v) / 7.0).collect();
        let y: Vec<f64> = values[n..n + m].iter().map(|&v| f64::from(v) / 7.0).collect();
        let observed: usize = x
            .iter()
            .map(|v| 1 + x.iter().chain(&y).filter(|w| *w < v).count())
            .sum();
        let (p_ge, p_le) = brute_force_p(n, m, observed);
        let greater = wilcoxon_rank_sum(&x, &y, Alternative::Greater).map_err(|e| e.to_string())?;
        let less = wilcoxon_rank_sum(&x, &y, Alternative::Less).map_err(|e| e.to_string())?;
        if greater.method != Method::Exact || less.method != Method::Exact {
            return Ok(Status::Fail(format!("n={n} m={m} not computed exactly")));
        }
        worst = worst
            .max((greater.p_one_sided - p_ge).abs())
            .max((less.p_one_sided - p_le).abs());
    }
    let x = [0.91, 0.92, 0.93, 0.94, 0.95];
    let y = [0.81, 0.82, 0.83, 0.84, 0.85];
    let p = wilcoxon_rank_sum(&x, &y, Alternative::Greater)
        .map_err(|e| e.to_string())?
        .p_one_sided;
    let corner = (p - 1.0 / 252.0).abs();
    Ok(check(
        worst <= 1e-12 && corner <= 1e-15,
        format!("max |p - enumeration| over 500 inputs = {worst:.1e}; all-greater 5v5 p = {p:.6} (1/252)"),
    ))
}

// ------------------------------------------------------- criterion 7

fn masking_statistics() -> Outcome {
    const VOCAB: u32 = 30_000;
    const SPECIALS: [u32; 5] = [0, 1, 2, 3, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // 1000 sequences of 100 ordinary tokens each, framed by specials.
    let sequences: Vec<Vec<u32>> = (0..1000)
        .map(|_| {
            let mut s = vec![2];
            s.extend((0..100).map(|_| rng.random_range(5..VOCAB)));
            s.push(3);
            s.extend([0, 0]);
            s
        })
        .collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [0.15, 0.30] {
        let mut config = MaskingConfig::new(p, 4, VOCAB, 11);
        config.special_token_ids = SPECIALS.into_iter().collect::<BTreeSet<u32>>();
        let batch = mlm_mask(&sequences, &config).map_err(|e| e.to_string())?;
        let t = batch.tally(&sequences, &config);

        let mut special_touched = 0;
        for ((orig, (inp, lab)), sel) in sequences
            .iter()
            .zip(batch.input_ids.iter().zip(&batch.labels))
            .zip(&batch.selection_mask)
        {
            for i in 0..orig.len() {
                if SPECIALS.contains(&orig[i]) && (sel[i] || inp[i] != orig[i] || lab[i] != IGNORE) {
                    special_touched += 1;
                }
            }
        }

        let n = t.eligible as f64;
        let sel = t.selected as f64;
        let within = |count: usize, trials: f64, prob: f64| {
            (count as f64 - trials * prob).abs() <= 3.0 * (trials * prob * (1.0 - prob)).sqrt()
        };
        // A random draw equal to the original id is tallied as kept.
        let pool = f64::from(VOCAB) - SPECIALS.len() as f64;
        let p_kept = 0.1 + 0.1 / pool;
        let p_random = 0.1 - 0.1 / pool;
        let good = t.eligible == 100_000
            && within(t.selected, n, p)
            && within(t.masked, sel, 0.8)
            && within(t.random, sel, p_random)
            && within(t.kept, sel, p_kept)
            && special_touched == 0;
        ok &= good;
        parts.push(format!(
            "p={p}: selected {:.4}, mask/random/keep {:.3}/{:.3}/{:.3}, specials touched {special_touched}",
            sel / n,
            t.masked as f64 / sel,
            t.random as f64 / sel,
            t.kept as f64 / sel
        ));
    }
    Ok(check(ok, parts.join("; ")))
}

// ------------------------------------------------------- criterion 8

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (rows, dim, classes) = (30, 6, 4);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let input = Matrix::from_vec(rows, dim, (0..rows * dim).map(|_| rng.random_range(-0.5..0.5)).collect());
        let output = Matrix::from_vec(
            classes,
            dim,
            (0..classes * dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
        );
        let batch: Vec<(Vec<usize>, usize)> = (0..rng.random_range(1..8))
            .map(|_| {
                let len = rng.random_range(1..6);
                let features = (0..len).map(|_| rng.random_range(0..rows)).collect();
                (features, rng.random_range(0..classes))
            })
            .collect();
        let (_, grad_in, grad_out) = softmax_loss_gradients(&input, &output, &batch);

        let rel = |a: f64, b: f64| (a - b).abs() / (a.abs() + b.abs()).max(1e-8);
        for idx in 0..rows * dim {
            let mut plus = input.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = input.clone();
            minus.as_mut_slice()[idx] -= h;
            let numeric = (softmax_loss_gradients(&plus, &output, &batch).0
                - softmax_loss_gradients(&minus, &output, &batch).0)
                / (2.0 * h);
            worst = worst.max(rel(grad_in.as_slice()[idx], numeric));
        }
        for idx in 0..classes * dim {
            let mut plus = output.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = output.clone();
            minus.as_mut_slice()[idx] -= h;
            let numeric = (softmax_loss_gradients(&input, &plus, &batch).0
                - softmax_loss_gradients(&input, &minus, &batch).0)
                / (2.0 * h);
            worst = worst.max(rel(grad_out.as_slice()[idx], numeric));
        }
    }
    Ok(check(worst < 1e-4, format!("max relative error over 20 batches = {worst:.2e}")))
}

// ------------------------------------------------------- criterion 9

fn vocab_expansion() -> Outcome {
    let config = VocabConfig {
        min_count: 1,
        bucket_count: 64,
        word_ngrams: 1,
        subword_range: Some((3, 4)),
    };
    let base_text: Vec<String> = (0..500).map(|i| format!("alt{i} alt{} alt{}", i % 7, i % 13)).collect();
    let vocab = build_vocab(base_text.iter().map(String::as_str), &config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let table = EmbeddingTable::random(vocab.n_words(), 64, 16, &mut rng);

    // 25,000 unseen words; word k appears (k % 5) + 1 times, plus known words.
    let corpus: Vec<String> = (0..25_000)
        .map(|k| {
            let w = format!("neu{k}");
            let mut line = vec![w; k % 5 + 1];
            line.push(format!("alt{}", k % 500));
            line.join(" ")
        })
        .collect();
    let (grown, grown_table) = expand_vocab(&vocab, &table, corpus.iter().map(String::as_str), DEFAULT_MAX_NEW, 3);
    let added = grown.n_words() - vocab.n_words();

    let ids_same = (0..vocab.n_words()).all(|i| grown.word(i) == vocab.word(i) && grown.id(vocab.word(i)) == Some(i));
    let rows_same = (0..vocab.n_words()).all(|i| {
        table
            .words
            .row(i)
            .iter()
            .zip(grown_table.words.row(i))
            .all(|(a, b)| a.to_bits() == b.to_bits())
    });
    let buckets_same = table
        .buckets
        .as_slice()
        .iter()
        .zip(grown_table.buckets.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    // The 20,000 most frequent: every word with k % 5 == 4, 3, 2 (15,000)
    // then the first 5,000 with k % 5 == 1.
    let expected_last = format!("neu{}", 5 * 4999 + 1);
    let frequency_order = grown.word(grown.n_words() - 1) == expected_last
        && (vocab.n_words()..grown.n_words()).all(|i| !grown.word(i).starts_with("alt"));
    Ok(check(
        added == DEFAULT_MAX_NEW && ids_same && rows_same && buckets_same && frequency_order,
        format!(
            "added {added} of 25000 candidates; old ids {} old rows {} buckets {}",
            if ids_same { "identical" } else { "CHANGED" },
            if rows_same { "bit-identical" } else { "CHANGED" },
            if buckets_same { "bit-identical" } else { "CHANGED" },
        ),
    ))
}

// ------------------------------------------------------ criterion 10

fn synthetic(split: SplitName, n: usize, offset: usize) -> LabeledDataset {
    let texts = [
        ("Die S-Bahn ist pünktlich :)", true, Sentiment::Positive),
        ("Zug fällt aus!!! @DB_Bahn", true, Sentiment::Negative),
        ("Wetter heute in Köln", false, Sentiment::Neutral),
        ("ICE 578 wieder 20 Min zu spät :(", true, Sentiment::Negative),
        ("Danke für die schnelle Hilfe", true, Sentiment::Positive),
        ("Fußball am Abend #sport", false, Sentiment::Neutral),
    ];
    let docs = (0..n)
        .map(|i| {
            let (t, rel, sent) = texts[i % texts.len()];
            Document::new(format!("http://ex/{}", offset + i), format!("{t} w{}", i % 11), Some(rel), Some(sent))
        })
        .collect();
    LabeledDataset::new(split, docs)
}

fn small_config(id: &str, task: Task) -> ExperimentConfig {
    let mut c = ExperimentConfig::baseline(id, task);
    c.train.dim = 10;
    c.train.bucket_count = 5_000;
    c.train.epochs = 5;
    c
}

fn records_json(records: &[germfeed::harness::ResultRecord]) -> Result<String, String> {
    records
        .iter()
        .map(|r| r.to_json_line().map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Outcome {
    let train = synthetic(SplitName::Training, 120, 0);
    let dev = synthetic(SplitName::Development, 30, 1000);
    let test = synthetic(SplitName::TestSyn, 30, 2000);
    let tweets = UnlabeledCorpus::new(
        "tweets",
        (0..200).map(|i| format!("bahn zug verspätung wort{} heute", i % 17)).collect(),
    );
    let base_lines: Vec<String> = (0..100).map(|i| format!("zug bahn wort{} köln", i % 9)).collect();

    let run_once = || -> Result<String, String> {
        let mut out = String::new();
        let base = train_unsupervised(
            base_lines.iter().map(String::as_str),
            &EmbeddingConfig {
                dim: 10,
                epochs: 2,
                min_count: 1,
                bucket_count: 500,
                ..EmbeddingConfig::default()
            },
            None,
        )
        .map_err(|e| e.to_string())?;
        let inputs = AdaptInputs {
            base: Some(base),
            task_corpus: None,
            domain_corpus: Some(tweets.clone()),
        };
        let mut config = small_config("adapted", Task::Sentiment);
        let mut plan = adaptation_matrix()[1].clone();
        plan.epochs = 1;
        config.adapt = Some(plan);
        let prov = base_provenance(&config, &[("train", &train)], &inputs);
        let cv = run_cv(&config, &train, &inputs).map_err(|e| e.to_string())?;
        out += &records_json(&cv.report.records(0, &prov))?;
        let test_run = run_test_eval(&config, &train, &dev, &[&test], &inputs).map_err(|e| e.to_string())?;
        out += &records_json(&test_run.records("adapted", 0, &prov))?;
        let baseline = small_config("baseline", Task::Relevance);
        let cv = run_cv(&baseline, &train, &AdaptInputs::default()).map_err(|e| e.to_string())?;
        out += &records_json(&cv.report.records(0, &base_provenance(&baseline, &[("train", &train)], &inputs)))?;
        Ok(out)
    };
    let a = run_once()?;
    let b = run_once()?;
    Ok(check(
        a == b && !a.is_empty(),
        format!("two full runs (pretrain, adapt, CV, test eval) gave {} identical record bytes", a.len()),
    ))
}

// ------------------------------------------------------ criterion 11

fn adaptation_grid() -> Outcome {
    let plans = adaptation_matrix();
    let labels: Vec<String> = plans.iter().map(|p| p.label()).collect();
    let expected = [
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
    ];
    let mut missing: Vec<&str> = expected.iter().copied().filter(|e| !labels.iter().any(|l| l == e)).collect();

    let base_lines: Vec<String> = (0..50).map(|i| format!("zug bahn wort{}", i % 5)).collect();
    let base = train_unsupervised(
        base_lines.iter().map(String::as_str),
        &EmbeddingConfig {
            dim: 8,
            epochs: 1,
            min_count: 1,
            bucket_count: 200,
            ..EmbeddingConfig::default()
        },
        None,
    )
    .map_err(|e| e.to_string())?;
    let task = UnlabeledCorpus::new("task", (0..40).map(|i| format!("zug neu{} spät", i % 6)).collect());
    let domain = UnlabeledCorpus::new("domain", (0..300).map(|i| format!("tweet dom{} bahn", i % 8)).collect());
    let mut provenance_ok = true;
    for plan in &plans {
        let mut plan = plan.clone();
        plan.epochs = 1;
        plan.domain_subset = plan.domain_subset.map(|n| n / 1000);
        let (vectors, prov): (WordVectors, _) =
            continue_pretraining(&plan, &base, Some(&task), Some(&domain)).map_err(|e| e.to_string())?;
        let map = prov.to_map();
        let wants_domain = plan.source != AdaptSource::Task;
        provenance_ok &= map.get("adapt_label") == Some(&plan.label())
            && map.get("mask_prob") == Some(&plan.mask_prob.to_string())
            && map.get("expand_vocab") == Some(&plan.expand_vocab.to_string())
            && (map.get("domain_corpus").map(String::as_str) != Some("-")) == wants_domain
            && vectors.table.is_finite();
    }
    if !provenance_ok {
        missing.push("provenance fields");
    }
    Ok(check(
        missing.is_empty() && plans.len() == 10,
        if missing.is_empty() {
            "10-plan embedding-level grid with complete provenance; transformer rows declared out of scope".into()
        } else {
            format!("missing: {}", missing.join(", "))
        },
    ))
}

// ------------------------------------------------------ criterion 12

fn corpus_statistics() -> Outcome {
    let Some(dir) = data_dir() else {
        return Ok(Status::NotRun("GERMEVAL_DIR not set".into()));
    };
    let train = load_split(&dir, "train", SplitName::Training)?;
    let normalized = normalize_dataset(&train, &RuleSet::standard(CasingMode::Lowercased));
    let s = compute_stats(normalized.texts());
    let band = |got: f64, want: f64| ((got - want) / want).abs() <= 0.02;
    let counts_ok = band(s.unique_unigrams as f64, 97_105.0)
        && band(s.unique_bigrams as f64, 621_031.0)
        && band(s.unique_trigrams as f64, 1_071_487.0);
    let length_ok = band(s.mean_doc_length_tokens, 76.0) || band(s.mean_doc_length_chars, 76.0);
    Ok(check(
        counts_ok && length_ok,
        format!(
            "uni {} bi {} tri {} (ref 97105/621031/1071487 ±2%); mean length {:.1} tokens / {:.1} chars (ref 76)",
            s.unique_unigrams,
            s.unique_bigrams,
            s.unique_trigrams,
            s.mean_doc_length_tokens,
            s.mean_doc_length_chars
        ),
    ))
}

fn main() -> ExitCode {
    // `cargo test` passes libtest flags; a name filter that excludes this
    // target is honoured by skipping everything.
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f)) {
        return ExitCode::SUCCESS;
    }

    let criteria: [Criterion; 12] = [
        ("ingestion counts", ingestion_counts),
        ("normalization golden", normalization_golden),
        ("baseline test-set reproduction", baseline_test_reproduction),
        ("cross-validation reproduction", cv_reproduction),
        ("micro-F1 oracle", micro_f1_oracle),
        ("Wilcoxon oracle", wilcoxon_oracle),
        ("masking statistics", masking_statistics),
        ("gradient check", gradient_check),
        ("vocabulary expansion", vocab_expansion),
        ("determinism", determinism),
        ("adaptation grid (transformers declared out of scope)", adaptation_grid),
        ("corpus statistics", corpus_statistics),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(Status::Pass(d)) => ("PASS", d),
            Ok(Status::NotRun(d)) => ("NOT RUN", d),
            Ok(Status::Fail(d)) => {
                failed += 1;
                ("FAIL", d)
            }
            Err(e) => {
                failed += 1;
                ("FAIL", format!("error: {e}"))
            }
        };
        println!("[{:>2}] {tag:<7} {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
