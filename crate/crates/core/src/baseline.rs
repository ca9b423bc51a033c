//! The reference curation recipe as one call: text extraction, heuristic
//! filtering, Bloom-filter deduplication and classifier filtering, with a
//! funnel report.

use std::sync::Arc;

use crate::corpus::{shard_corpus, Document, ShardPolicy, Tokenizer};
use crate::dedup::BffConfig;
use crate::extract::ExtractConfig;
use crate::heuristics::HeuristicRules;
use crate::pipeline::registry::{bloom_stage, extract_mapper, heuristics_mapper, ScoreFilterStage};
use crate::pipeline::{ExecutionReport, Funnel, Pipeline, PipelineError, Scope, DEFAULT_SEED};
use crate::quality::{QualityScorer, ThresholdMode};

#[derive(Clone)]
pub struct QualityStep {
    pub scorer: Arc<dyn QualityScorer>,
    pub keep: f64,
}

#[derive(Clone)]
pub struct BaselineConfig {
    pub seed: u64,
    pub workers: usize,
    pub shards: usize,
    pub shard_policy: ShardPolicy,
    pub tokenizer: Tokenizer,
    /// `None` when the input is already plain text.
    pub extract: Option<ExtractConfig>,
    pub rules: Option<HeuristicRules>,
    pub bff: BffConfig,
    pub bff_scope: Scope,
    pub quality: Option<QualityStep>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            seed: DEFAULT_SEED,
            workers: 1,
            shards: 1,
            shard_policy: ShardPolicy::RoundRobin,
            tokenizer: Tokenizer::default(),
            extract: None,
            rules: Some(HeuristicRules::default()),
            bff: BffConfig::default(),
            bff_scope: Scope::Shard,
            quality: None,
        }
    }
}

pub struct BaselineOutput {
    pub documents: Vec<Document>,
    pub report: ExecutionReport,
    pub funnel: Funnel,
}

pub fn baseline_pipeline(cfg: &BaselineConfig) -> Pipeline {
    let mut p = Pipeline::new(cfg.tokenizer.clone(), cfg.seed);
    if let Some(e) = &cfg.extract {
        p = p.stage("extract", extract_mapper(e.clone()));
    }
    if let Some(r) = &cfg.rules {
        p = p.stage("heuristics", heuristics_mapper(r.clone()));
    }
    p = p.global("dedup-bloom", cfg.bff_scope, bloom_stage(cfg.bff.clone()));
    if let Some(q) = &cfg.quality {
        let stage = ScoreFilterStage { scorer: q.scorer.clone(), keep: q.keep, mode: ThresholdMode::Exact };
        p = p.global("quality-filter", Scope::Corpus, Arc::new(stage));
    }
    p
}

pub fn run_full_baseline(docs: Vec<Document>, cfg: &BaselineConfig) -> Result<BaselineOutput, PipelineError> {
    let shards = shard_corpus(docs, cfg.shards, cfg.shard_policy)
        .map_err(|e| PipelineError::config("shards", e))?;
    let (documents, report) = baseline_pipeline(cfg).run_sharded(shards, cfg.workers)?;
    let funnel = report.funnel();
    Ok(BaselineOutput { documents, report, funnel })
}
