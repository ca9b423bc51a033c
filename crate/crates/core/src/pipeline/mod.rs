//! Mapper framework and sharded executor.
//!
//! A pipeline is an ordered list of per-document [`Mapper`]s plus
//! [`GlobalStage`]s that see every document at once (deduplication,
//! percentile filters). Each global runs after a named mapper stage, or at
//! the end. Shard-scope globals run inside each shard; corpus-scope globals
//! are barriers that see all shards together.

mod config;
pub(crate) mod registry;
mod report;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Shard, Tokenizer};

pub use config::{load_pipeline_config, load_pipeline_config_with_base, GlobalSpec, PipelineConfig, StageSpec};
pub use registry::{build_pipeline, global_names, mapper_names};
pub use report::{ExecutionReport, Funnel, FunnelStep, StageReport};

/// Seed used when a config gives none.
pub const DEFAULT_SEED: u64 = 0x00C0_FFEE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapperKind {
    /// Returns the document unchanged or nothing.
    Filter,
    /// Returns exactly one document with the same text.
    Enricher,
    /// Returns any number of documents.
    Modifier,
}

impl MapperKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapperKind::Filter => "filter",
            MapperKind::Enricher => "enricher",
            MapperKind::Modifier => "modifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct MapperError(pub String);

pub trait Mapper: Send + Sync {
    fn kind(&self) -> MapperKind;
    fn apply(&self, doc: Document) -> Result<Vec<Document>, MapperError>;
}

/// Runs `m` on `doc` and checks its kind contract.
pub fn apply_mapper(m: &dyn Mapper, doc: Document) -> Result<Vec<Document>, MapperError> {
    let kind = m.kind();
    let original = (kind != MapperKind::Modifier).then(|| doc.clone());
    let out = m.apply(doc)?;
    match (kind, original) {
        (MapperKind::Filter, Some(orig)) => {
            if out.len() > 1 || out.first().is_some_and(|d| *d != orig) {
                return Err(MapperError("filter changed or multiplied its document".into()));
            }
        }
        (MapperKind::Enricher, Some(orig)) => {
            if out.len() != 1 || out[0].text != orig.text || out[0].id != orig.id {
                return Err(MapperError("enricher must return one document with unchanged text".into()));
            }
        }
        _ => {}
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Runs independently inside each shard.
    #[default]
    Shard,
    /// Runs once over all shards concatenated.
    Corpus,
}

#[derive(Debug, Clone)]
pub struct GlobalContext {
    pub seed: u64,
    pub tokenizer: Tokenizer,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("global stage {stage:?} failed: {message}")]
    Global { stage: String, message: String },
    #[error("a worker panicked while processing shard {shard}")]
    WorkerPanic { shard: usize },
    #[error("workers must be at least 1")]
    Workers,
}

impl PipelineError {
    pub(crate) fn config(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        PipelineError::Config { path: path.into(), message: message.to_string() }
    }
}

/// Corpus-level stage. Returns one slot per input document, in order;
/// `None` removes it.
pub trait GlobalStage: Send + Sync {
    fn run(&self, docs: Vec<Document>, ctx: &GlobalContext) -> Result<Vec<Option<Document>>, String>;
}

#[derive(Clone)]
enum Step {
    Map { id: String, mapper: Arc<dyn Mapper> },
    Global { id: String, scope: Scope, stage: Arc<dyn GlobalStage> },
}

impl Step {
    fn id(&self) -> &str {
        match self {
            Step::Map { id, .. } | Step::Global { id, .. } => id,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Step::Map { mapper, .. } => mapper.kind().as_str(),
            Step::Global { .. } => "global",
        }
    }
}

#[derive(Clone)]
pub struct Pipeline {
    steps: Vec<Step>,
    seed: u64,
    tokenizer: Tokenizer,
    config: Option<PipelineConfig>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("steps", &self.step_names())
            .field("seed", &self.seed)
            .field("tokenizer", &self.tokenizer)
            .finish()
    }
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::new(Tokenizer::default(), DEFAULT_SEED)
    }
}

impl Pipeline {
    pub fn new(tokenizer: Tokenizer, seed: u64) -> Self {
        Pipeline { steps: Vec::new(), seed, tokenizer, config: None }
    }

    /// Appends a mapper stage. Panics on a duplicate id.
    pub fn stage(mut self, id: &str, mapper: Arc<dyn Mapper>) -> Self {
        self.assert_unique(id);
        self.steps.push(Step::Map { id: id.to_string(), mapper });
        self
    }

    /// Appends a global stage at the current end of the pipeline.
    pub fn global(mut self, id: &str, scope: Scope, stage: Arc<dyn GlobalStage>) -> Self {
        self.assert_unique(id);
        self.steps.push(Step::Global { id: id.to_string(), scope, stage });
        self
    }

    fn assert_unique(&self, id: &str) {
        assert!(self.steps.iter().all(|s| s.id() != id), "duplicate stage id {id:?}");
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn step_names(&self) -> Vec<&str> {
        self.steps.iter().map(Step::id).collect()
    }

    /// The config this pipeline was built from, if any.
    pub fn config(&self) -> Option<&PipelineConfig> {
        self.config.as_ref()
    }

    pub(crate) fn with_config(mut self, cfg: PipelineConfig) -> Self {
        self.config = Some(cfg);
        self
    }

    fn ctx(&self) -> GlobalContext {
        GlobalContext { seed: self.seed, tokenizer: self.tokenizer.clone() }
    }

    fn tokens(&self, docs: &[Document]) -> u64 {
        docs.iter().map(|d| self.tokenizer.count(&d.text) as u64).sum()
    }

    fn empty_report(&self) -> ExecutionReport {
        ExecutionReport {
            stages: self.steps.iter().map(|s| StageReport::new(s.id(), s.kind())).collect(),
            ..Default::default()
        }
    }

    fn run_map(&self, mapper: &dyn Mapper, docs: Vec<Document>, rep: &mut StageReport) -> Vec<Document> {
        let mut out = Vec::with_capacity(docs.len());
        for d in docs {
            match apply_mapper(mapper, d) {
                Ok(v) => out.extend(v),
                Err(_) => rep.errors += 1,
            }
        }
        out
    }

    fn run_global(&self, id: &str, stage: &dyn GlobalStage, docs: Vec<Document>) -> Result<Vec<Option<Document>>, PipelineError> {
        let n = docs.len();
        let out = stage
            .run(docs, &self.ctx())
            .map_err(|message| PipelineError::Global { stage: id.to_string(), message })?;
        if out.len() != n {
            return Err(PipelineError::Global {
                stage: id.to_string(),
                message: format!("returned {} slots for {n} documents", out.len()),
            });
        }
        Ok(out)
    }

    /// Runs steps `range` on one shard, treating every global as
    /// shard-local.
    fn run_steps(
        &self,
        range: std::ops::Range<usize>,
        mut docs: Vec<Document>,
        rep: &mut ExecutionReport,
    ) -> Result<Vec<Document>, PipelineError> {
        let mut tokens = self.tokens(&docs);
        for i in range {
            let step = &self.steps[i];
            let sr = &mut rep.stages[i];
            let t0 = Instant::now();
            sr.docs_in += docs.len() as u64;
            sr.tokens_in += tokens;
            docs = match step {
                Step::Map { mapper, .. } => self.run_map(mapper.as_ref(), docs, sr),
                Step::Global { id, stage, .. } => {
                    self.run_global(id, stage.as_ref(), docs)?.into_iter().flatten().collect()
                }
            };
            tokens = self.tokens(&docs);
            sr.docs_out += docs.len() as u64;
            sr.tokens_out += tokens;
            sr.wall_ms += t0.elapsed().as_secs_f64() * 1e3;
            sr.finish();
        }
        Ok(docs)
    }

    /// Runs the whole pipeline on one shard. Corpus-scope globals see just
    /// this shard.
    pub fn run(&self, shard: Shard) -> Result<(Shard, ExecutionReport), PipelineError> {
        let t0 = Instant::now();
        let mut rep = self.empty_report();
        rep.docs_in = shard.documents.len() as u64;
        rep.tokens_in = self.tokens(&shard.documents);
        let docs = self.run_steps(0..self.steps.len(), shard.documents, &mut rep)?;
        rep.docs_out = docs.len() as u64;
        rep.tokens_out = self.tokens(&docs);
        rep.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        Ok((Shard { index: shard.index, documents: docs }, rep))
    }

    /// Runs shards in parallel on a pool of `workers` threads. Output is the
    /// shards' results concatenated in shard order, independent of
    /// `workers`. Corpus-scope globals run serially over all shards at once.
    pub fn run_sharded(&self, shards: Vec<Shard>, workers: usize) -> Result<(Vec<Document>, ExecutionReport), PipelineError> {
        if workers == 0 {
            return Err(PipelineError::Workers);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| PipelineError::Global { stage: "<pool>".into(), message: e.to_string() })?;
        let t0 = Instant::now();
        let mut total = self.empty_report();
        total.docs_in = shards.iter().map(|s| s.documents.len() as u64).sum();
        total.tokens_in = shards.iter().map(|s| self.tokens(&s.documents)).sum();

        let mut indices: Vec<usize> = shards.iter().map(|s| s.index).collect();
        let mut parts: Vec<Vec<Document>> = shards.into_iter().map(|s| s.documents).collect();
        let mut start = 0;
        while start < self.steps.len() {
            let barrier = (start..self.steps.len())
                .find(|&i| matches!(self.steps[i], Step::Global { scope: Scope::Corpus, .. }))
                .unwrap_or(self.steps.len());
            if barrier > start {
                let results: Vec<std::thread::Result<Result<(Vec<Document>, ExecutionReport), PipelineError>>> =
                    pool.install(|| {
                        parts
                            .into_par_iter()
                            .map(|docs| {
                                catch_unwind(AssertUnwindSafe(|| {
                                    let mut rep = self.empty_report();
                                    let out = self.run_steps(start..barrier, docs, &mut rep)?;
                                    Ok((out, rep))
                                }))
                            })
                            .collect()
                    });
                parts = Vec::with_capacity(results.len());
                for (k, r) in results.into_iter().enumerate() {
                    let (docs, rep) = r.map_err(|_| PipelineError::WorkerPanic { shard: indices[k] })??;
                    total.merge(&rep);
                    parts.push(docs);
                }
            }
            if barrier < self.steps.len() {
                parts = self.run_corpus_global(barrier, parts, &mut total)?;
            }
            start = barrier + 1;
        }
        indices.clear();
        let docs: Vec<Document> = parts.into_iter().flatten().collect();
        total.docs_out = docs.len() as u64;
        total.tokens_out = self.tokens(&docs);
        total.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        Ok((docs, total))
    }

    fn run_corpus_global(
        &self,
        i: usize,
        parts: Vec<Vec<Document>>,
        total: &mut ExecutionReport,
    ) -> Result<Vec<Vec<Document>>, PipelineError> {
        let Step::Global { id, stage, .. } = &self.steps[i] else { unreachable!() };
        let t0 = Instant::now();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        let all: Vec<Document> = parts.into_iter().flatten().collect();
        let sr = &mut total.stages[i];
        sr.docs_in += all.len() as u64;
        sr.tokens_in += self.tokens(&all);
        let mut slots = self.run_global(id, stage.as_ref(), all)?.into_iter();
        let parts: Vec<Vec<Document>> = sizes.iter().map(|&n| slots.by_ref().take(n).flatten().collect()).collect();
        let sr = &mut total.stages[i];
        sr.docs_out += parts.iter().map(|p| p.len() as u64).sum::<u64>();
        sr.tokens_out += parts.iter().map(|p| self.tokens(p)).sum::<u64>();
        sr.wall_ms += t0.elapsed().as_secs_f64() * 1e3;
        sr.finish();
        Ok(parts)
    }
}

/// [`Pipeline::run`].
pub fn run_pipeline(p: &Pipeline, shard: Shard) -> Result<(Shard, ExecutionReport), PipelineError> {
    p.run(shard)
}

/// [`Pipeline::run_sharded`].
pub fn run_sharded(p: &Pipeline, shards: Vec<Shard>, workers: usize) -> Result<(Vec<Document>, ExecutionReport), PipelineError> {
    p.run_sharded(shards, workers)
}
