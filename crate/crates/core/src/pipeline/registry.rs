use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::config::PipelineConfig;
use super::{GlobalContext, GlobalStage, Mapper, MapperError, MapperKind, Pipeline, PipelineError, DEFAULT_SEED};
use crate::corpus::{read_corpus, Document, Tokenizer};
use crate::decontam::{decontaminate, read_eval_set, EvalSample, FlagConfig};
use crate::dedup::{
    bff_dedup, exact_dedup_mask, minhash_cluster, minhash_signature, suffix_dedup_with, BffConfig, ExactKey,
    MinHashConfig, SuffixConfig,
};
use crate::extract::{extract_text, ExtractConfig};
use crate::heuristics::{heuristic_filter, url_filter, HeuristicRules, UrlBanlist};
use crate::quality::{quality_filter_mask, NgramClassifier, NgramLm, PerplexityScorer, QualityScorer, ThresholdMode};

const MAPPERS: &[(&str, MapperKind)] = &[
    ("heuristics", MapperKind::Filter),
    ("url", MapperKind::Filter),
    ("word_count", MapperKind::Filter),
    ("token_count", MapperKind::Enricher),
    ("quality_score", MapperKind::Enricher),
    ("extract", MapperKind::Modifier),
    ("split_paragraphs", MapperKind::Modifier),
    ("strip_whitespace", MapperKind::Modifier),
    ("decontam_excise", MapperKind::Modifier),
];

const GLOBALS: &[&str] = &[
    "dedup-exact",
    "dedup-bloom",
    "dedup-minhash",
    "dedup-suffix",
    "quality-filter",
    "perplexity-filter",
];

/// Built-in mapper names and kinds.
pub fn mapper_names() -> &'static [(&'static str, MapperKind)] {
    MAPPERS
}

/// Built-in global stage names.
pub fn global_names() -> &'static [&'static str] {
    GLOBALS
}

fn params<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T, PipelineError> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_path_to_error::deserialize(v).map_err(|e| {
        let sub = e.path().to_string();
        let at = if sub == "." { format!("{path}.params") } else { format!("{path}.params.{sub}") };
        PipelineError::config(at, e.inner())
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

// ---- filters ----

struct HeuristicsFilter(HeuristicRules);

impl Mapper for HeuristicsFilter {
    fn kind(&self) -> MapperKind {
        MapperKind::Filter
    }
    fn apply(&self, d: Document) -> Result<Vec<Document>, MapperError> {
        Ok(if heuristic_filter(&d, &self.0).is_keep() { vec![d] } else { vec![] })
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
struct UrlParams {
    banned_domains: Vec<String>,
    banned_substrings: Vec<String>,
    domains_file: Option<PathBuf>,
    substrings_file: Option<PathBuf>,
}

struct UrlFilter(UrlBanlist);

impl Mapper for UrlFilter {
    fn kind(&self) -> MapperKind {
        MapperKind::Filter
    }
    fn apply(&self, d: Document) -> Result<Vec<Document>, MapperError> {
        Ok(if url_filter(&d, &self.0).is_keep() { vec![d] } else { vec![] })
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WordCountFilter {
    min_words: usize,
    max_words: Option<usize>,
}

impl Default for WordCountFilter {
    fn default() -> Self {
        WordCountFilter { min_words: 1, max_words: None }
    }
}

impl Mapper for WordCountFilter {
    fn kind(&self) -> MapperKind {
        MapperKind::Filter
    }
    fn apply(&self, d: Document) -> Result<Vec<Document>, MapperError> {
        let n = d.text.split_whitespace().count();
        let ok = n >= self.min_words && self.max_words.is_none_or(|m| n <= m);
        Ok(if ok { vec![d] } else { vec![] })
    }
}

// ---- enrichers ----

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct KeyParam {
    key: String,
}

struct TokenCount {
    key: String,
    tokenizer: Tokenizer,
}

impl Mapper for TokenCount {
    fn kind(&self) -> MapperKind {
        MapperKind::Enricher
    }
    fn apply(&self, mut d: Document) -> Result<Vec<Document>, MapperError> {
        let n = self.tokenizer.count(&d.text);
        d.metadata.insert(self.key.clone(), n.to_string());
        Ok(vec![d])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParams {
    model: PathBuf,
    #[serde(default = "quality_key")]
    key: String,
}

fn quality_key() -> String {
    "quality_score".into()
}

struct QualityScore {
    key: String,
    model: Arc<NgramClassifier>,
}

impl Mapper for QualityScore {
    fn kind(&self) -> MapperKind {
        MapperKind::Enricher
    }
    fn apply(&self, mut d: Document) -> Result<Vec<Document>, MapperError> {
        let s = self.model.probability(&d.text);
        d.metadata.insert(self.key.clone(), format!("{s:.6}"));
        Ok(vec![d])
    }
}

// ---- modifiers ----

/// Documents whose extraction is empty are dropped.
struct Extract(ExtractConfig);

impl Mapper for Extract {
    fn kind(&self) -> MapperKind {
        MapperKind::Modifier
    }
    fn apply(&self, mut d: Document) -> Result<Vec<Document>, MapperError> {
        d.text = extract_text(&d.text, &self.0);
        Ok(if d.text.is_empty() { vec![] } else { vec![d] })
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoParams {}

/// One document per blank-line-separated paragraph, ids suffixed `#<k>`.
/// A single-paragraph document passes through unchanged.
struct SplitParagraphs;

impl Mapper for SplitParagraphs {
    fn kind(&self) -> MapperKind {
        MapperKind::Modifier
    }
    fn apply(&self, d: Document) -> Result<Vec<Document>, MapperError> {
        let mut paras: Vec<String> = Vec::new();
        let mut cur: Vec<&str> = Vec::new();
        for line in d.text.split('\n') {
            if line.trim().is_empty() {
                if !cur.is_empty() {
                    paras.push(cur.join("\n"));
                    cur.clear();
                }
            } else {
                cur.push(line);
            }
        }
        if !cur.is_empty() {
            paras.push(cur.join("\n"));
        }
        if paras.len() <= 1 {
            return Ok(if paras.is_empty() { vec![] } else { vec![d] });
        }
        Ok(paras
            .into_iter()
            .enumerate()
            .map(|(k, text)| {
                let mut p = d.clone();
                p.id = format!("{}#{k}", d.id);
                p.text = text;
                p.metadata.insert("paragraph".into(), k.to_string());
                p
            })
            .collect())
    }
}

/// Trims every line, collapses runs of blank lines to one, trims the
/// document; empty results are dropped.
struct StripWhitespace;

impl Mapper for StripWhitespace {
    fn kind(&self) -> MapperKind {
        MapperKind::Modifier
    }
    fn apply(&self, mut d: Document) -> Result<Vec<Document>, MapperError> {
        let mut out: Vec<&str> = Vec::new();
        for line in d.text.lines().map(str::trim) {
            if line.is_empty() && out.last().is_none_or(|l| l.is_empty()) {
                continue;
            }
            out.push(line);
        }
        while out.last().is_some_and(|l| l.is_empty()) {
            out.pop();
        }
        let text = out.join("\n");
        if text.is_empty() {
            return Ok(vec![]);
        }
        d.text = text;
        Ok(vec![d])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecontamParams {
    eval_set: PathBuf,
    #[serde(default)]
    case_insensitive: bool,
}

struct DecontamExcise {
    samples: Vec<EvalSample>,
    cfg: FlagConfig,
}

impl Mapper for DecontamExcise {
    fn kind(&self) -> MapperKind {
        MapperKind::Modifier
    }
    fn apply(&self, d: Document) -> Result<Vec<Document>, MapperError> {
        Ok(vec![decontaminate(&d, &self.samples, &self.cfg).0])
    }
}

fn build_mapper(name: &str, p: &Value, path: &str, base: &Path, tok: &Tokenizer) -> Result<Arc<dyn Mapper>, PipelineError> {
    Ok(match name {
        "heuristics" => {
            let rules: HeuristicRules = params(p, path)?;
            rules.validate().map_err(|e| PipelineError::config(format!("{path}.params"), e))?;
            Arc::new(HeuristicsFilter(rules))
        }
        "url" => {
            let u: UrlParams = params(p, path)?;
            let mut list = UrlBanlist::new(&u.banned_domains, &u.banned_substrings);
            let files = UrlBanlist::from_files(
                u.domains_file.map(|f| resolve(base, &f)).as_deref(),
                u.substrings_file.map(|f| resolve(base, &f)).as_deref(),
            )
            .map_err(|e| PipelineError::config(format!("{path}.params"), e))?;
            list.banned_domains.extend(files.banned_domains);
            list.banned_substrings.extend(files.banned_substrings);
            Arc::new(UrlFilter(list))
        }
        "word_count" => Arc::new(params::<WordCountFilter>(p, path)?),
        "token_count" => {
            let k: KeyParam = params(p, path)?;
            Arc::new(TokenCount { key: k.key, tokenizer: tok.clone() })
        }
        "quality_score" => {
            let m: ModelParams = params(p, path)?;
            let model = NgramClassifier::load(&resolve(base, &m.model))
                .map_err(|e| PipelineError::config(format!("{path}.params.model"), e))?;
            Arc::new(QualityScore { key: m.key, model: Arc::new(model) })
        }
        "extract" => {
            let cfg: ExtractConfig = params(p, path)?;
            cfg.validate().map_err(|e| PipelineError::config(format!("{path}.params"), e))?;
            Arc::new(Extract(cfg))
        }
        "split_paragraphs" => {
            params::<NoParams>(p, path)?;
            Arc::new(SplitParagraphs)
        }
        "strip_whitespace" => {
            params::<NoParams>(p, path)?;
            Arc::new(StripWhitespace)
        }
        "decontam_excise" => {
            let dp: DecontamParams = params(p, path)?;
            let samples = read_eval_set(&resolve(base, &dp.eval_set))
                .map_err(|e| PipelineError::config(format!("{path}.params.eval_set"), e))?;
            Arc::new(DecontamExcise { samples, cfg: FlagConfig { case_insensitive: dp.case_insensitive } })
        }
        other => return Err(PipelineError::config(format!("{path}.name"), format!("unknown mapper {other:?}"))),
    })
}

impl Default for KeyParam {
    fn default() -> Self {
        KeyParam { key: "token_count".into() }
    }
}

// ---- global stages ----

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ExactParams {
    key: ExactKey,
}

struct ExactStage(ExactKey);

impl GlobalStage for ExactStage {
    fn run(&self, docs: Vec<Document>, _: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        let mask = exact_dedup_mask(&docs, self.0);
        Ok(docs.into_iter().zip(mask).map(|(d, k)| k.then_some(d)).collect())
    }
}

struct BloomStage(BffConfig);

impl GlobalStage for BloomStage {
    fn run(&self, docs: Vec<Document>, ctx: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        let (out, _) = bff_dedup(&docs, &self.0, &ctx.tokenizer, ctx.seed).map_err(|e| e.to_string())?;
        Ok(out.into_iter().map(|o| o.document).collect())
    }
}

/// Keeps the earliest document of each cluster. Documents without tokens
/// pass through.
struct MinHashStage(MinHashConfig);

impl GlobalStage for MinHashStage {
    fn run(&self, docs: Vec<Document>, ctx: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        let sigs: Vec<_> = docs
            .par_iter()
            .enumerate()
            .filter_map(|(i, d)| {
                minhash_signature(d, &self.0, &ctx.tokenizer).ok().map(|mut s| {
                    s.id = format!("{i:020}");
                    s
                })
            })
            .collect();
        let clusters = minhash_cluster(&sigs).map_err(|e| e.to_string())?;
        let mut drop = vec![false; docs.len()];
        for c in clusters {
            for m in c.members.iter().filter(|m| **m != c.retained) {
                drop[m.parse::<usize>().expect("index id")] = true;
            }
        }
        Ok(docs.into_iter().zip(drop).map(|(d, x)| (!x).then_some(d)).collect())
    }
}

struct SuffixStage(SuffixConfig);

impl GlobalStage for SuffixStage {
    fn run(&self, docs: Vec<Document>, ctx: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        Ok(suffix_dedup_with(docs, &self.0, &ctx.tokenizer).map_err(|e| e.to_string())?.into_iter().map(Some).collect())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QualityParams {
    model: PathBuf,
    #[serde(default = "default_keep")]
    keep: f64,
    #[serde(default)]
    threshold: ThresholdMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerplexityParams {
    reference: PathBuf,
    #[serde(default = "default_keep")]
    keep: f64,
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_k")]
    k: f64,
    #[serde(default)]
    threshold: ThresholdMode,
}

fn default_keep() -> f64 {
    0.1
}
fn default_order() -> usize {
    3
}
fn default_k() -> f64 {
    0.01
}

/// Percentile filter over any scorer.
pub(crate) struct ScoreFilterStage {
    pub scorer: Arc<dyn QualityScorer>,
    pub keep: f64,
    pub mode: ThresholdMode,
}

impl GlobalStage for ScoreFilterStage {
    fn run(&self, docs: Vec<Document>, _: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        let (mask, _, _) = quality_filter_mask(&docs, self.scorer.as_ref(), self.keep, self.mode).map_err(|e| e.to_string())?;
        Ok(docs.into_iter().zip(mask).map(|(d, k)| k.then_some(d)).collect())
    }
}

pub(crate) fn bloom_stage(cfg: BffConfig) -> Arc<dyn GlobalStage> {
    Arc::new(BloomStage(cfg))
}

pub(crate) fn heuristics_mapper(rules: HeuristicRules) -> Arc<dyn Mapper> {
    Arc::new(HeuristicsFilter(rules))
}

pub(crate) fn extract_mapper(cfg: ExtractConfig) -> Arc<dyn Mapper> {
    Arc::new(Extract(cfg))
}

fn check_keep(keep: f64, path: &str) -> Result<(), PipelineError> {
    if keep > 0.0 && keep <= 1.0 {
        Ok(())
    } else {
        Err(PipelineError::config(format!("{path}.params.keep"), format!("{keep} not in (0,1]")))
    }
}

fn build_global(name: &str, p: &Value, path: &str, base: &Path, tok: &Tokenizer) -> Result<Arc<dyn GlobalStage>, PipelineError> {
    let bad = |e: &dyn std::fmt::Display| PipelineError::config(format!("{path}.params"), e);
    Ok(match name {
        "dedup-exact" => Arc::new(ExactStage(params::<ExactParams>(p, path)?.key)),
        "dedup-bloom" => {
            let cfg: BffConfig = params(p, path)?;
            cfg.validate().map_err(|e| bad(&e))?;
            Arc::new(BloomStage(cfg))
        }
        "dedup-minhash" => {
            let cfg: MinHashConfig = params(p, path)?;
            cfg.validate().map_err(|e| bad(&e))?;
            Arc::new(MinHashStage(cfg))
        }
        "dedup-suffix" => {
            let cfg: SuffixConfig = params(p, path)?;
            if cfg.min_run == 0 {
                return Err(bad(&"min_run must be >= 1"));
            }
            Arc::new(SuffixStage(cfg))
        }
        "quality-filter" => {
            let q: QualityParams = params(p, path)?;
            check_keep(q.keep, path)?;
            let model = NgramClassifier::load(&resolve(base, &q.model))
                .map_err(|e| PipelineError::config(format!("{path}.params.model"), e))?;
            Arc::new(ScoreFilterStage { scorer: Arc::new(model), keep: q.keep, mode: q.threshold })
        }
        "perplexity-filter" => {
            let q: PerplexityParams = params(p, path)?;
            check_keep(q.keep, path)?;
            let (docs, _) = read_corpus(&resolve(base, &q.reference))
                .map_err(|e| PipelineError::config(format!("{path}.params.reference"), e))?;
            let lm = NgramLm::train(&docs, q.order, q.k, tok.clone()).map_err(|e| bad(&e))?;
            Arc::new(ScoreFilterStage { scorer: Arc::new(PerplexityScorer { lm }), keep: q.keep, mode: q.threshold })
        }
        other => return Err(PipelineError::config(format!("{path}.name"), format!("unknown global stage {other:?}"))),
    })
}

/// Validates `cfg` and instantiates every stage. Unknown names, kinds that
/// do not match the named mapper, duplicate ids, dangling `after`
/// references and bad params all fail here with the offending path.
pub fn build_pipeline(cfg: &PipelineConfig, base: &Path) -> Result<Pipeline, PipelineError> {
    let tok = match cfg.tokenizer.as_deref() {
        None => Tokenizer::default(),
        Some(n) => Tokenizer::from_name(n).ok_or_else(|| PipelineError::config("tokenizer", format!("unknown tokenizer {n:?}")))?,
    };
    if cfg.shards == Some(0) {
        return Err(PipelineError::config("shards", "must be >= 1"));
    }
    let mut p = Pipeline::new(tok.clone(), cfg.seed.unwrap_or(DEFAULT_SEED));
    let mut ids = HashSet::new();
    let mut stage_ids = Vec::new();
    let mut mappers = Vec::new();
    for (i, s) in cfg.stages.iter().enumerate() {
        let path = format!("stages[{i}]");
        let Some(&(_, kind)) = MAPPERS.iter().find(|(n, _)| *n == s.name) else {
            return Err(PipelineError::config(format!("{path}.name"), format!("unknown mapper {:?}", s.name)));
        };
        if kind != s.kind {
            return Err(PipelineError::config(
                format!("{path}.kind"),
                format!("{:?} is a {}, not a {}", s.name, kind.as_str(), s.kind.as_str()),
            ));
        }
        let id = s.id.clone().unwrap_or_else(|| s.name.clone());
        if !ids.insert(id.clone()) {
            return Err(PipelineError::config(format!("{path}.id"), format!("duplicate stage id {id:?}")));
        }
        mappers.push(build_mapper(&s.name, &s.params, &path, base, &tok)?);
        stage_ids.push(id);
    }
    let mut globals = Vec::new();
    for (j, g) in cfg.globals.iter().enumerate() {
        let path = format!("globals[{j}]");
        if !GLOBALS.contains(&g.name.as_str()) {
            return Err(PipelineError::config(format!("{path}.name"), format!("unknown global stage {:?}", g.name)));
        }
        if let Some(a) = &g.after {
            if !stage_ids.contains(a) {
                return Err(PipelineError::config(format!("{path}.after"), format!("no stage with id {a:?}")));
            }
        }
        let id = g.id.clone().unwrap_or_else(|| g.name.clone());
        if !ids.insert(id.clone()) {
            return Err(PipelineError::config(format!("{path}.id"), format!("duplicate stage id {id:?}")));
        }
        globals.push((id, g.after.clone(), g.scope, build_global(&g.name, &g.params, &path, base, &tok)?));
    }
    for (id, m) in stage_ids.iter().zip(mappers) {
        p = p.stage(id, m);
        for (gid, _, scope, g) in globals.iter().filter(|g| g.1.as_deref() == Some(id)) {
            p = p.global(gid, *scope, g.clone());
        }
    }
    for (gid, _, scope, g) in globals.iter().filter(|g| g.1.is_none()) {
        p = p.global(gid, *scope, g.clone());
    }
    Ok(p.with_config(cfg.clone()))
}
