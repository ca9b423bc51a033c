//! Benchmark aggregation and filter diagnostics.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Tokenizer};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("random baseline {0} must be in [0,1)")]
    Baseline(f64),
    #[error("both classes must be present")]
    SingleClass,
    #[error("scores and labels differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("no task scores")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskScore {
    pub task: String,
    pub accuracy: f64,
    /// Falls back to [`core_baseline`] when absent.
    #[serde(default)]
    pub baseline: Option<f64>,
}

/// `(acc - baseline) / (1 - baseline)`.
pub fn centered_accuracy(acc: f64, baseline: f64) -> Result<f64, MetricsError> {
    if !(0.0..1.0).contains(&baseline) {
        return Err(MetricsError::Baseline(baseline));
    }
    Ok((acc - baseline) / (1.0 - baseline))
}

/// Random-guess accuracy of the 22 Core tasks: `1 / choices` for multiple
/// choice, 0 for open-ended generation and exact-match tasks.
pub const CORE_BASELINES: [(&str, f64); 22] = [
    ("agi_eval_lsat_ar", 0.2),
    ("arc_challenge", 0.25),
    ("arc_easy", 0.25),
    ("bigbench_cs_algorithms", 0.0),
    ("bigbench_dyck_languages", 0.0),
    ("bigbench_language_identification", 0.25),
    ("bigbench_operators", 0.0),
    ("bigbench_qa_wikidata", 0.0),
    ("bigbench_repeat_copy_logic", 0.0),
    ("boolq", 0.5),
    ("commonsense_qa", 0.2),
    ("copa", 0.5),
    ("coqa", 0.0),
    ("hellaswag", 0.25),
    ("hellaswag_zeroshot", 0.25),
    ("jeopardy", 0.0),
    ("lambada_openai", 0.0),
    ("openbook_qa", 0.25),
    ("piqa", 0.5),
    ("squad", 0.0),
    ("winograd", 0.5),
    ("winogrande", 0.5),
];

pub fn core_baseline(task: &str) -> Option<f64> {
    CORE_BASELINES.iter().find(|(t, _)| *t == task).map(|(_, b)| *b)
}

/// Unweighted mean of centered accuracies. Tasks without an explicit
/// baseline use the Core table, else 0.
pub fn aggregate_core(scores: &[TaskScore]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = 0.0;
    for s in scores {
        let b = s.baseline.or_else(|| core_baseline(&s.task)).unwrap_or(0.0);
        sum += centered_accuracy(s.accuracy, b)?;
    }
    Ok(sum / scores.len() as f64)
}

/// Mann-Whitney form: share of (positive, negative) pairs ranked correctly,
/// ties counting one half. Runs in `O(n log n)` via average ranks.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::Length(scores.len(), labels.len()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&k| labels[k] != 0).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub total_tokens: u64,
    pub mean_tokens: f64,
    /// Lower middle for even counts.
    pub median_tokens: u64,
}

pub fn corpus_stats(docs: &[Document], tok: &Tokenizer) -> CorpusStats {
    if docs.is_empty() {
        return CorpusStats::default();
    }
    let mut lens: Vec<u64> = docs.iter().map(|d| tok.count(&d.text) as u64).collect();
    lens.sort_unstable();
    let total: u64 = lens.iter().sum();
    CorpusStats {
        documents: docs.len(),
        total_tokens: total,
        mean_tokens: total as f64 / docs.len() as f64,
        median_tokens: lens[(lens.len() - 1) / 2],
    }
}
