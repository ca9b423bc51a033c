use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use curate::corpus::{read_corpus, write_jsonl, Compression, Document, Tokenizer};
use curate::pipeline::{
    build_pipeline, ExecutionReport, Funnel, PipelineConfig, PipelineError, StageReport, DEFAULT_SEED,
};
use curate::corpus::{shard_corpus, ShardPolicy};
use serde::Serialize;
use serde_json::Value;

/// Exit 1: bad invocation. Exit 2: bad or unreadable data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

pub fn data(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

pub fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

pub fn fraction(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} not in (0, 1]"))
    }
}

/// Flags shared by every corpus-to-corpus subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input JSONL files, gzip when the name ends in `.gz`. Repeatable.
    #[arg(short, long = "input", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output JSONL file; standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub workers: usize,
    /// Shards processed independently (shard-local deduplication).
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub shards: usize,
    /// `unicode` or `whitespace`.
    #[arg(long, default_value = "unicode")]
    pub tokenizer: String,
}

impl Common {
    pub fn tok(&self) -> CliResult<Tokenizer> {
        tokenizer(&self.tokenizer)
    }
}

pub fn tokenizer(name: &str) -> CliResult<Tokenizer> {
    Tokenizer::from_name(name).ok_or_else(|| usage(format!("unknown tokenizer {name:?}")))
}

/// Reads and concatenates inputs. Malformed lines are reported on stderr
/// and counted.
pub fn read_inputs(paths: &[PathBuf]) -> CliResult<(Vec<Document>, u64)> {
    let mut docs = Vec::new();
    let mut bad = 0u64;
    for p in paths {
        let (d, errs) = read_corpus(p).map_err(data)?;
        for e in &errs {
            eprintln!("warning: skipped record {e}");
        }
        bad += errs.len() as u64;
        docs.extend(d);
    }
    Ok((docs, bad))
}

pub fn write_docs(docs: &[Document], out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            write_jsonl(docs, p, Compression::from_path(p)).map_err(data)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let res = docs
                .iter()
                .try_for_each(|d| {
                    serde_json::to_writer(&mut w, d)?;
                    w.write_all(b"\n").map_err(serde_json::Error::io)
                })
                .map_err(std::io::Error::from)
                .and_then(|()| w.flush());
            stdout_result(res)?;
        }
    }
    Ok(())
}

/// A closed downstream pipe ends output quietly.
fn stdout_result(res: std::io::Result<()>) -> CliResult<()> {
    match res {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(data),
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(data)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            stdout_result(out.write_all(text.as_bytes()).and_then(|()| out.flush()))
        }
    }
}

/// Report written by every subcommand. Validates against
/// `schema/report.schema.json`.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub inputs: Vec<String>,
    pub output: String,
    pub execution: ExecutionReport,
    pub funnel: Funnel,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl RunReport {
    pub fn new(command: &str, c: &Common, execution: ExecutionReport) -> Self {
        RunReport {
            command: command.to_string(),
            seed: c.seed,
            workers: c.workers,
            inputs: c.input.iter().map(|p| p.display().to_string()).collect(),
            output: c.output.as_ref().map_or("-".into(), |p| p.display().to_string()),
            funnel: execution.funnel(),
            execution,
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn emit(&self, path: Option<&Path>) -> CliResult<()> {
        eprint!("{}", self.funnel);
        match path {
            Some(p) => write_json(self, Some(p)),
            None => Ok(()),
        }
    }
}

fn pipeline_error(e: PipelineError, from_flags: bool) -> CliError {
    match e {
        PipelineError::Config { .. } if from_flags => usage(e),
        _ => data(e),
    }
}

/// Builds `cfg` and runs it over the inputs, sharded per `c.shards`.
pub fn run_config(command: &str, c: &Common, mut cfg: PipelineConfig, base: &Path, from_flags: bool) -> CliResult<()> {
    if cfg.seed.is_none() {
        cfg.seed = Some(c.seed);
    }
    if cfg.tokenizer.is_none() {
        cfg.tokenizer = Some(c.tokenizer.clone());
    }
    let shards = if from_flags { c.shards } else { cfg.shards.unwrap_or(c.shards) };
    let policy = cfg.shard_policy.unwrap_or(ShardPolicy::RoundRobin);
    let pipeline = build_pipeline(&cfg, base).map_err(|e| pipeline_error(e, from_flags))?;
    let (docs, bad) = read_inputs(&c.input)?;
    let shards = shard_corpus(docs, shards, policy).map_err(usage)?;
    let (out, mut rep) = pipeline.run_sharded(shards, c.workers).map_err(|e| pipeline_error(e, from_flags))?;
    rep.input_errors = bad;
    write_docs(&out, c.output.as_deref())?;
    let mut report = RunReport::new(command, c, rep);
    report.seed = pipeline.seed();
    report.emit(c.report.as_deref())
}

/// Report for a single stage run outside the pipeline runner.
pub fn single_stage(
    name: &str,
    kind: &str,
    before: &[Document],
    after: &[Document],
    tok: &Tokenizer,
    started: Instant,
    input_errors: u64,
) -> ExecutionReport {
    let count = |d: &[Document]| d.iter().map(|x| tok.count(&x.text) as u64).sum::<u64>();
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut s = StageReport::new(name, kind);
    s.docs_in = before.len() as u64;
    s.docs_out = after.len() as u64;
    s.tokens_in = count(before);
    s.tokens_out = count(after);
    s.wall_ms = wall_ms;
    s.finish();
    ExecutionReport {
        docs_in: s.docs_in,
        docs_out: s.docs_out,
        tokens_in: s.tokens_in,
        tokens_out: s.tokens_out,
        input_errors,
        wall_ms,
        stages: vec![s],
    }
}
