use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "germfeed",
    version,
    about = "Normalization, classification and adaptation pipeline for German customer-feedback text",
    arg_required_else_help = true,
    after_help = "Every numeric option can also come from a --config file or a GERMFEED_<KEY> environment \
                  variable; flags win over the environment, which wins over the file.\n\
                  Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error."
)]
pub struct Cli {
    /// key=value config file (see `germfeed config-keys`)
    #[arg(long, global = true, env = "GERMFEED_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a TSV split and report document and class counts
    Ingest(IngestArgs),
    /// Normalize the text column of a TSV (or plain lines)
    Preprocess(PreprocessArgs),
    /// Unique n-gram counts and mean document lengths
    Stats(StatsArgs),
    /// Train a classifier on training (+ development) data
    Train(TrainArgs),
    /// Train word embeddings on unlabeled lines
    Pretrain(PretrainArgs),
    /// Continue embedding training on task/domain text per an adaptation plan
    Adapt(AdaptArgs),
    /// Predict labels for raw text lines
    Predict(PredictArgs),
    /// Evaluate a saved model on a labeled split
    Evaluate(EvaluateArgs),
    /// Stratified k-fold cross-validation on the training split
    Cv(CvArgs),
    /// Compare stored CV results against a baseline with a rank-sum test
    Compare(CompareArgs),
    /// Dump the masked-language-model corruption of tokenized lines
    Mask(MaskArgs),
    /// List the keys accepted in config files
    ConfigKeys,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Split name recorded with the documents
    #[arg(long, default_value = "training")]
    pub split: String,
    /// Skip malformed lines (reported on stderr) instead of failing
    #[arg(long)]
    pub lenient: bool,
    /// Drop empty and duplicate documents
    #[arg(long)]
    pub clean: bool,
    /// Write the parsed (and cleaned) documents as TSV
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CasingArgs {
    /// Lowercase the normalized text (the default)
    #[arg(long, conflicts_with = "cased")]
    pub lowercase: bool,
    /// Keep the original casing
    #[arg(long)]
    pub cased: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output path; standard output when omitted
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Treat the input as plain text, one document per line
    #[arg(long)]
    pub lines: bool,
    /// Rules file replacing the standard rule set
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Print the effective rule set and its id, then exit
    #[arg(long)]
    pub print_rules: bool,
    #[command(flatten)]
    pub casing: CasingArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Plain text input, one document per line
    #[arg(long)]
    pub lines: bool,
    /// Apply the normalization rules first
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub casing: CasingArgs,
    /// Row label; defaults to the file stem
    #[arg(long)]
    pub subset: Option<String>,
    /// Emit key=value lines instead of a table row
    #[arg(long)]
    pub kv: bool,
}

/// Classifier hyperparameters; unset values fall back to the environment,
/// then the config file, then defaults.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// A (relevance) or B (sentiment)
    #[arg(long, env = "GERMFEED_SUBTASK")]
    pub subtask: Option<String>,
    #[arg(long, env = "GERMFEED_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "GERMFEED_DIM")]
    pub dim: Option<usize>,
    #[arg(long, env = "GERMFEED_LR")]
    pub lr: Option<f64>,
    #[arg(long, env = "GERMFEED_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long = "word-ngrams", env = "GERMFEED_WORD_NGRAMS")]
    pub word_ngrams: Option<usize>,
    #[arg(long, env = "GERMFEED_LOSS")]
    pub loss: Option<String>,
    #[arg(long, env = "GERMFEED_THREADS")]
    pub threads: Option<usize>,
    #[arg(long = "min-count", env = "GERMFEED_MIN_COUNT")]
    pub min_count: Option<u64>,
    #[arg(long, env = "GERMFEED_BUCKET")]
    pub bucket: Option<usize>,
    #[arg(long, env = "GERMFEED_MINN")]
    pub minn: Option<usize>,
    #[arg(long, env = "GERMFEED_MAXN")]
    pub maxn: Option<usize>,
    /// lowercased or cased
    #[arg(long, env = "GERMFEED_CASING")]
    pub casing: Option<String>,
    /// Initialize input rows from a word-vector text file
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RecordArgs {
    /// Append result records to this JSONL store
    #[arg(long, env = "GERMFEED_STORE")]
    pub store: Option<PathBuf>,
    /// Experiment id used in stored records
    #[arg(long, env = "GERMFEED_ID")]
    pub id: Option<String>,
    /// Record timestamp; defaults to SOURCE_DATE_EPOCH, else 0
    #[arg(long, env = "GERMFEED_TIMESTAMP")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Development split, concatenated to the training data
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Synchronic test split to evaluate after training
    #[arg(long = "test-syn")]
    pub test_syn: Option<PathBuf>,
    /// Diachronic test split to evaluate after training
    #[arg(long = "test-dia")]
    pub test_dia: Option<PathBuf>,
    /// Where to save the model
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub record: RecordArgs,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Unlabeled text, one document per line
    #[arg(long)]
    pub input: PathBuf,
    /// Word-vector text file to write
    #[arg(long)]
    pub output: PathBuf,
    /// cbow or skipgram
    #[arg(long, default_value = "skipgram")]
    pub model: String,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long = "min-count", default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 2_000_000)]
    pub bucket: usize,
    /// Minimum subword length; 0 disables subwords
    #[arg(long, default_value_t = 3)]
    pub minn: usize,
    #[arg(long, default_value_t = 6)]
    pub maxn: usize,
    /// Frequent-word subsampling threshold; 0 disables it
    #[arg(long, default_value_t = 1e-4)]
    pub sampling: f64,
    #[arg(long, env = "GERMFEED_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Normalize lines with the standard rules before training
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args, Default)]
pub struct PlanArgs {
    /// Adaptation plan file (key=value)
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Plan overrides as key=value, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base word vectors to continue from
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Unlabeled task text, one document per line
    #[arg(long = "task-corpus")]
    pub task_corpus: Option<PathBuf>,
    /// Unlabeled domain text (e.g. tweets), one document per line
    #[arg(long = "domain-corpus")]
    pub domain_corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Adapted word vectors to write
    #[arg(long)]
    pub output: PathBuf,
    /// Print the plan and its row label, then exit
    #[arg(long)]
    pub dry_run: bool,
    /// Print every plan of the adaptation grid and exit
    #[arg(long)]
    pub list_matrix: bool,
    #[command(flatten)]
    pub record: RecordArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw text lines; standard input when omitted
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of labels per line
    #[arg(short, long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled TSV split (raw text)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, env = "GERMFEED_SUBTASK")]
    pub subtask: Option<String>,
    /// Split name used in stored records
    #[arg(long, default_value = "custom")]
    pub split: String,
    #[command(flatten)]
    pub record: RecordArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(short, long, env = "GERMFEED_K")]
    pub k: Option<usize>,
    #[arg(long = "fold-seed", env = "GERMFEED_FOLD_SEED")]
    pub fold_seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub record: RecordArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, env = "GERMFEED_STORE")]
    pub store: PathBuf,
    #[arg(long)]
    pub baseline: String,
    /// Candidate experiment ids
    #[arg(long = "candidate", num_args = 0..)]
    pub candidates: Vec<String>,
    #[arg(long, env = "GERMFEED_ALPHA")]
    pub alpha: Option<f64>,
    /// Render the test-set table for baseline and candidates instead
    #[arg(long)]
    pub test: bool,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Text lines, tokenized on whitespace
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "mask-prob", default_value_t = 0.15)]
    pub mask_prob: f64,
    #[arg(long, env = "GERMFEED_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Only print the selection summary
    #[arg(long)]
    pub summary: bool,
}
