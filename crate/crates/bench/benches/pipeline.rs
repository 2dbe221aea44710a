use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use germfeed::adapt::{mlm_mask, MaskingConfig};
use germfeed::normalize::normalize;
use germfeed::stats::compute_stats;
use germfeed::stattest::{wilcoxon_rank_sum, Alternative};
use germfeed::textmodel::{build_vocab, train_supervised, VocabConfig};
use germfeed::{CasingMode, Document, LabeledDataset, RuleSet, Sentiment, SplitName, Task, TrainConfig};

const SAMPLES: [&str; 6] = [
    "@DB_Bahn Zug fällt aus, 30 Min Verspätung!!! #bahn http://t.co/abc",
    "Die S-Bahn ist heute pünktlich :) danke",
    "ICE 578 am 24.12.2016 um 17:45 ab Köln, Ticket 49,90 €",
    "Kein WLAN im Zug... schon wieder :(",
    "Wetter in München ist schön 😎",
    "@nordschaf Mit der KVB + S-Bahn kommt man überall fix hin.",
];

fn corpus(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{} nr{}", SAMPLES[i % SAMPLES.len()], i % 97)).collect()
}

fn dataset(n: usize) -> LabeledDataset {
    let rules = RuleSet::standard(CasingMode::Lowercased);
    let docs = corpus(n)
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let sentiment = [Sentiment::Negative, Sentiment::Positive, Sentiment::Neutral][i % 3];
            Document::new(format!("http://ex/{i}"), normalize(t, &rules), Some(i % 4 != 0), Some(sentiment))
        })
        .collect();
    LabeledDataset::new(SplitName::Training, docs)
}

fn bench_normalize(c: &mut Criterion) {
    let rules = RuleSet::standard(CasingMode::Lowercased);
    let texts = corpus(1000);
    let bytes: usize = texts.iter().map(String::len).sum();
    let mut group = c.benchmark_group("normalize");
    group.throughput(Throughput::Bytes(bytes as u64));
    group.bench_function("1000 docs", |b| {
        b.iter(|| {
            for t in &texts {
                black_box(normalize(t, &rules));
            }
        })
    });
    group.finish();

    let normalized: Vec<String> = texts.iter().map(|t| normalize(t, &rules)).collect();
    c.bench_function("stats/1000 docs", |b| {
        b.iter(|| compute_stats(normalized.iter().map(String::as_str)))
    });
}

fn bench_features(c: &mut Criterion) {
    let ds = dataset(1000);
    let vocab = build_vocab(
        ds.texts(),
        &VocabConfig {
            min_count: 1,
            bucket_count: 2_000_000,
            word_ngrams: 4,
            subword_range: None,
        },
    )
    .unwrap();
    let tokenized: Vec<Vec<&str>> = ds.texts().map(|t| t.split_whitespace().collect()).collect();
    c.bench_function("features/1000 docs, 4-grams", |b| {
        b.iter(|| {
            for tokens in &tokenized {
                black_box(vocab.features(tokens));
            }
        })
    });
}

fn bench_training(c: &mut Criterion) {
    let ds = dataset(2000);
    let config = TrainConfig {
        bucket_count: 100_000,
        epochs: 5,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("2000 docs, 5 epochs", |b| {
        b.iter(|| train_supervised(&ds, Task::Sentiment, &config).unwrap())
    });
    group.finish();
}

fn bench_wilcoxon(c: &mut Criterion) {
    let x = [0.81, 0.83, 0.79, 0.84, 0.82];
    let y = [0.78, 0.80, 0.77, 0.79, 0.785];
    c.bench_function("wilcoxon/exact 5v5", |b| {
        b.iter(|| wilcoxon_rank_sum(black_box(&x), black_box(&y), Alternative::Greater).unwrap())
    });
    let big_x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let big_y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.53).cos()).collect();
    c.bench_function("wilcoxon/normal 200v200", |b| {
        b.iter(|| wilcoxon_rank_sum(black_box(&big_x), black_box(&big_y), Alternative::Greater).unwrap())
    });
}

fn bench_masking(c: &mut Criterion) {
    let sequences: Vec<Vec<u32>> = (0..100)
        .map(|s| (0..512).map(|i| 5 + ((s * 7919 + i * 31) % 29_000) as u32).collect())
        .collect();
    let config = MaskingConfig::new(0.15, 4, 30_000, 0);
    c.bench_function("mlm_mask/51200 tokens", |b| {
        b.iter_batched(|| config.clone(), |cfg| mlm_mask(&sequences, &cfg).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, bench_normalize, bench_features, bench_training, bench_wilcoxon, bench_masking);
criterion_main!(benches);
