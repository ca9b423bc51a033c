//! Token-weighted mixing of labelled sources.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_corpus, CorpusError, Document, Tokenizer};
use crate::hash::splitmix64;

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("source {label:?} has {available} tokens, needs {needed}")]
    Insufficient { label: String, available: u64, needed: u64 },
    #[error("invalid mix spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone)]
pub struct MixEntry {
    pub label: String,
    pub documents: Vec<Document>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct MixSpec {
    pub entries: Vec<MixEntry>,
    pub target_tokens: u64,
    pub seed: u64,
}

/// On-disk form: `{"entries":[{"label","path","weight"}],"target_tokens","seed"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSpecFile {
    pub entries: Vec<MixSpecFileEntry>,
    pub target_tokens: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSpecFileEntry {
    pub label: String,
    pub path: PathBuf,
    pub weight: f64,
}

impl MixSpecFile {
    /// Reads every source corpus; relative paths resolve against `base`.
    /// Malformed records are skipped and returned.
    pub fn load(&self, base: &Path) -> Result<(MixSpec, usize), MixError> {
        let mut bad = 0;
        let mut entries = Vec::new();
        for e in &self.entries {
            let path = if e.path.is_absolute() { e.path.clone() } else { base.join(&e.path) };
            let (documents, errs) = read_corpus(&path)?;
            bad += errs.len();
            entries.push(MixEntry { label: e.label.clone(), documents, weight: e.weight });
        }
        Ok((MixSpec { entries, target_tokens: self.target_tokens, seed: self.seed }, bad))
    }
}

fn validate(spec: &MixSpec) -> Result<Vec<f64>, MixError> {
    let mut labels = HashSet::new();
    for e in &spec.entries {
        if !labels.insert(e.label.as_str()) {
            return Err(MixError::Invalid(format!("duplicate label {:?}", e.label)));
        }
        if !(e.weight >= 0.0 && e.weight.is_finite()) {
            return Err(MixError::Invalid(format!("weight of {:?} must be finite and >= 0", e.label)));
        }
    }
    let total: f64 = spec.entries.iter().map(|e| e.weight).sum();
    if total <= 0.0 {
        return Err(MixError::Invalid("weights sum to zero".into()));
    }
    Ok(spec.entries.iter().map(|e| e.weight / total).collect())
}

/// Per-source quota is `round(w * target_tokens)` with weights normalized.
/// Each source is shuffled with its own seeded stream and documents are
/// taken until the quota is reached, so the last one may overshoot. The
/// union is shuffled again; every output document's `source` is its label.
pub fn mix_sources(spec: &MixSpec, tok: &Tokenizer) -> Result<(Vec<Document>, MixtureReport), MixError> {
    let weights = validate(spec)?;
    let mut state = spec.seed;
    let mut out = Vec::new();
    let mut quotas = BTreeMap::new();
    for (e, w) in spec.entries.iter().zip(weights) {
        let source_seed = splitmix64(&mut state);
        let quota = (w * spec.target_tokens as f64).round() as u64;
        quotas.insert(e.label.clone(), w);
        if quota == 0 {
            continue;
        }
        let counts: Vec<u64> = e.documents.iter().map(|d| tok.count(&d.text) as u64).collect();
        let available: u64 = counts.iter().sum();
        if available < quota {
            return Err(MixError::Insufficient { label: e.label.clone(), available, needed: quota });
        }
        let mut order: Vec<usize> = (0..e.documents.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(source_seed));
        let mut got = 0;
        for i in order {
            if got >= quota {
                break;
            }
            got += counts[i];
            out.push(e.documents[i].clone().with_source(e.label.clone()));
        }
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(&mut state)));
    let mut report = mixture_report(&out, tok);
    report.nominal = quotas;
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceShare {
    pub documents: usize,
    pub tokens: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MixtureReport {
    pub total_tokens: u64,
    pub sources: BTreeMap<String, SourceShare>,
    /// Normalized target weights, when produced by [`mix_sources`].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub nominal: BTreeMap<String, f64>,
}

/// Token counts and shares per `source`; unlabelled documents count as
/// `"unknown"`.
pub fn mixture_report(docs: &[Document], tok: &Tokenizer) -> MixtureReport {
    let mut r = MixtureReport::default();
    for d in docs {
        let label = if d.source.is_empty() { "unknown" } else { d.source.as_str() };
        let n = tok.count(&d.text) as u64;
        let s = r.sources.entry(label.to_string()).or_default();
        s.documents += 1;
        s.tokens += n;
        r.total_tokens += n;
    }
    for s in r.sources.values_mut() {
        s.fraction = if r.total_tokens == 0 { 0.0 } else { s.tokens as f64 / r.total_tokens as f64 };
    }
    r
}
