//! `curate`: corpus curation stages over JSONL files.

mod commands;
mod common;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{fraction, positive, Common};

#[derive(Parser, Debug)]
#[command(name = "curate", version, about = "Pretraining corpus curation over JSONL files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn raw-HTML `text` fields into plain text.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Extraction settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep every line, trimming nothing but scripts and styles.
        #[arg(long)]
        full_text: bool,
    },
    /// Heuristic quality rules, plus URL banlists when given.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Rule profile as JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// File with one banned domain per line.
        #[arg(long)]
        banned_domains: Option<PathBuf>,
        /// File with one banned URL substring per line.
        #[arg(long)]
        banned_substrings: Option<PathBuf>,
    },
    /// Drop documents whose text was seen before.
    DedupExact {
        #[command(flatten)]
        common: Common,
        /// `raw-text` or `normalized-text`.
        #[arg(long, default_value = "raw-text")]
        key: String,
    },
    /// Paragraph and document Bloom-filter deduplication.
    DedupBloom {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 13, value_parser = positive)]
        min_ngram: usize,
        #[arg(long, default_value_t = 13, value_parser = positive)]
        max_ngram: usize,
        #[arg(long, default_value_t = 0.8, value_parser = fraction)]
        threshold: f64,
        /// Target false-positive rate of the filter.
        #[arg(long, default_value_t = 0.01)]
        fpr: f64,
        /// Filter sizing; the input token count when absent.
        #[arg(long)]
        expected_tokens: Option<u64>,
        /// Resume from a saved filter.
        #[arg(long)]
        snapshot_in: Option<PathBuf>,
        /// Save the filter after the run.
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// MinHash near-duplicate clustering; keeps the first of each cluster.
    DedupMinhash {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5, value_parser = positive)]
        ngram: usize,
        #[arg(long, default_value_t = 93, value_parser = positive)]
        bands: usize,
        #[arg(long, default_value_t = 15, value_parser = positive)]
        rows: usize,
        /// Pick bands and rows for this many permutations by matching the 450x20 curve.
        #[arg(long, value_parser = positive, conflicts_with_all = ["bands", "rows"])]
        budget: Option<usize>,
        /// Write clusters as JSON.
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Remove repeated token runs with a suffix array.
    DedupSuffix {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50, value_parser = positive)]
        min_run: usize,
        #[arg(long, default_value_t = 20_000_000)]
        max_tokens: usize,
    },
    /// Classifier training, scoring and percentile filtering.
    #[command(subcommand)]
    Quality(QualityCmd),
    /// Benchmark contamination measurement and removal.
    #[command(subcommand)]
    Decontam(DecontamCmd),
    /// Token-weighted mixing of labelled sources.
    Mix {
        /// Mix spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value = "unicode")]
        tokenizer: String,
    },
    /// Document and token counts; the report goes to standard output.
    Stats {
        #[arg(required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value = "unicode")]
        tokenizer: String,
    },
    /// Run a JSON pipeline config.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluation metric aggregation.
    #[command(subcommand)]
    Metrics(MetricsCmd),
}

#[derive(Subcommand, Debug)]
enum QualityCmd {
    /// Train a hashed n-gram classifier.
    Train {
        /// Positive (reference) documents.
        #[arg(long, required = true, num_args = 1..)]
        positive: Vec<PathBuf>,
        /// Negative documents.
        #[arg(long, required = true, num_args = 1..)]
        negative: Vec<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1 << 21, value_parser = positive)]
        buckets: usize,
        /// Comma-separated n-gram orders.
        #[arg(long, default_value = "1,2", value_delimiter = ',')]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Attach scores as metadata.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "quality_score")]
        key: String,
    },
    /// Keep the top `keep` fraction by classifier or perplexity score.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "reference", conflicts_with = "reference")]
        model: Option<PathBuf>,
        /// Score by n-gram LM perplexity trained on this corpus instead.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1, value_parser = fraction)]
        keep: f64,
        /// Use a quantile sketch with this compactor size.
        #[arg(long, value_parser = positive)]
        sketch_k: Option<usize>,
    },
    /// Turn Q&A posts into positive training documents.
    PrepEli5 {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum DecontamCmd {
    /// Per-sample share of tokens covered by n-grams of the input corpus.
    Measure {
        #[command(flatten)]
        common: Common,
        /// Eval set JSONL.
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value_t = 10, value_parser = positive)]
        ngram: usize,
        /// Index with a Bloom filter of this false-positive rate.
        #[arg(long)]
        bloom_fpr: Option<f64>,
    },
    /// Cut matched questions and options out of training documents.
    Excise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        case_insensitive: bool,
    },
}

#[derive(Subcommand, Debug)]
enum MetricsCmd {
    /// Mean centered accuracy over `[{"task","accuracy","baseline"?}]`.
    Core {
        #[arg(long)]
        scores: PathBuf,
    },
    /// ROC-AUC of `{"score","label"}` JSONL records.
    Auc {
        #[arg(short, long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
