//! Benchmark decontamination.
//!
//! Two procedures:
//! * token-overlap measurement: index the training corpus's n-grams and
//!   report, per eval sample, the share of tokens covered by an indexed
//!   n-gram, labelled dirty (> 0.8), clean (< 0.2) or partial;
//! * question/option flagging: a document is flagged when it contains a
//!   question's last sentence and at least one of its options, and the
//!   matched strings can be cut out.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Tokenizer};
use crate::dedup::{BloomFilter, DedupError};
use crate::hash::hash_tokens128;

const INDEX_SEED: u64 = 0xDEC0_47A1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<usize>,
}

impl EvalSample {
    pub fn text(id: impl Into<String>, text: impl Into<String>) -> Self {
        EvalSample { id: id.into(), text: Some(text.into()), ..Default::default() }
    }

    pub fn qa<S: Into<String>>(id: impl Into<String>, question: impl Into<String>, options: impl IntoIterator<Item = S>) -> Self {
        EvalSample {
            id: id.into(),
            question: Some(question.into()),
            options: options.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match (&self.text, &self.question) {
            (None, None) => Err(format!("sample {:?}: needs text or question", self.id)),
            (_, Some(_)) if self.options.is_empty() => Err(format!("sample {:?}: question without options", self.id)),
            _ => Ok(()),
        }
    }

    /// Text scanned for token overlap: `text`, else the question followed by
    /// its options, one per line.
    pub fn overlap_text(&self) -> String {
        match (&self.text, &self.question) {
            (Some(t), _) => t.clone(),
            (None, Some(q)) => std::iter::once(q.as_str())
                .chain(self.options.iter().map(String::as_str))
                .collect::<Vec<_>>()
                .join("\n"),
            (None, None) => String::new(),
        }
    }
}

/// Reads a JSONL eval set of `{"id","text"}` or `{"id","question","options"}`
/// records. Errors name the 1-based line.
pub fn read_eval_set(path: &std::path::Path) -> Result<Vec<EvalSample>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: EvalSample =
            serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        s.validate().map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug)]
enum Membership {
    Exact(HashSet<u128>),
    Bloom(BloomFilter),
}

/// n-gram membership over the indexed corpus.
#[derive(Debug)]
pub struct OverlapIndex {
    n: usize,
    tokenizer: Tokenizer,
    grams: Membership,
}

fn doc_grams(doc: &Document, n: usize, tok: &Tokenizer) -> Vec<u128> {
    let tokens = tok.tokenize(&doc.text);
    tokens.windows(n).map(|g| hash_tokens128(g, INDEX_SEED)).collect()
}

/// Exact index of every `n`-token window of every document.
pub fn build_overlap_index(docs: &[Document], n: usize, tok: &Tokenizer) -> OverlapIndex {
    let n = n.max(1);
    let per_doc: Vec<Vec<u128>> = docs.par_iter().map(|d| doc_grams(d, n, tok)).collect();
    let set: HashSet<u128> = per_doc.into_iter().flatten().collect();
    OverlapIndex { n, tokenizer: tok.clone(), grams: Membership::Exact(set) }
}

/// Bloom-backed index. False positives can only raise contamination
/// fractions, by at most the filter's false-positive rate per n-gram.
pub fn build_overlap_index_bloom(
    docs: &[Document],
    n: usize,
    tok: &Tokenizer,
    eps: f64,
    seed: u64,
) -> Result<OverlapIndex, DedupError> {
    let n = n.max(1);
    let expected: u64 = docs.iter().map(|d| tok.count(&d.text) as u64).sum();
    let filter = BloomFilter::new(expected.max(1), eps, seed)?;
    docs.par_iter().for_each(|d| {
        for h in doc_grams(d, n, tok) {
            filter.check_and_insert_hash(h);
        }
    });
    Ok(OverlapIndex { n, tokenizer: tok.clone(), grams: Membership::Bloom(filter) })
}

impl OverlapIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Distinct n-grams held; `None` for the Bloom mode.
    pub fn len(&self) -> Option<usize> {
        match &self.grams {
            Membership::Exact(s) => Some(s.len()),
            Membership::Bloom(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn contains(&self, gram: &[&str]) -> bool {
        let h = hash_tokens128(gram, INDEX_SEED);
        match &self.grams {
            Membership::Exact(s) => s.contains(&h),
            Membership::Bloom(f) => f.contains_hash(h),
        }
    }

    /// Per-token flag: covered by at least one indexed n-gram.
    pub fn covered(&self, tokens: &[&str]) -> Vec<bool> {
        let mut out = vec![false; tokens.len()];
        for (i, g) in tokens.windows(self.n).enumerate() {
            if self.contains(g) {
                out[i..i + self.n].iter_mut().for_each(|c| *c = true);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationLabel {
    Dirty,
    Partial,
    Clean,
}

impl ContaminationLabel {
    pub fn from_fraction(f: f64) -> Self {
        if f > 0.8 {
            ContaminationLabel::Dirty
        } else if f < 0.2 {
            ContaminationLabel::Clean
        } else {
            ContaminationLabel::Partial
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleContamination {
    pub id: String,
    pub tokens: usize,
    pub contaminated: usize,
    pub fraction: f64,
    pub label: ContaminationLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub samples: Vec<SampleContamination>,
    /// Percent of samples per label.
    pub percent: BTreeMap<ContaminationLabel, f64>,
}

pub fn contamination_fractions(samples: &[EvalSample], idx: &OverlapIndex) -> ContaminationReport {
    let per: Vec<SampleContamination> = samples
        .par_iter()
        .map(|s| {
            let text = s.overlap_text();
            let tokens = idx.tokenizer.tokenize(&text);
            let contaminated = idx.covered(&tokens).into_iter().filter(|&c| c).count();
            let fraction = if tokens.is_empty() { 0.0 } else { contaminated as f64 / tokens.len() as f64 };
            SampleContamination {
                id: s.id.clone(),
                tokens: tokens.len(),
                contaminated,
                fraction,
                label: ContaminationLabel::from_fraction(fraction),
            }
        })
        .collect();
    let mut percent: BTreeMap<ContaminationLabel, f64> = [
        (ContaminationLabel::Dirty, 0.0),
        (ContaminationLabel::Partial, 0.0),
        (ContaminationLabel::Clean, 0.0),
    ]
    .into_iter()
    .collect();
    if !per.is_empty() {
        for s in &per {
            *percent.get_mut(&s.label).unwrap() += 100.0 / per.len() as f64;
        }
    }
    ContaminationReport { samples: per, percent }
}

/// Last sentence of `question`. Sentences end at `.`, `?` or `!` followed by
/// whitespace or the end of the text.
pub fn last_sentence(question: &str) -> &str {
    let chars: Vec<(usize, char)> = question.char_indices().collect();
    let mut bounds = vec![0];
    for (j, &(i, c)) in chars.iter().enumerate() {
        let next_ws = chars.get(j + 1).is_none_or(|&(_, n)| n.is_whitespace());
        if matches!(c, '.' | '?' | '!') && next_ws {
            bounds.push(i + c.len_utf8());
        }
    }
    bounds.push(question.len());
    bounds
        .windows(2)
        .rev()
        .map(|w| question[w[0]..w[1]].trim())
        .find(|s| !s.is_empty() && !s.chars().all(|c| matches!(c, '.' | '?' | '!')))
        .unwrap_or("")
}

/// Whitespace-collapsed text with a map back to original byte offsets.
struct Normalized {
    text: String,
    /// Original byte span of the char behind each normalized byte.
    origin: Vec<(usize, usize)>,
}

fn normalize(s: &str, fold_case: bool) -> Normalized {
    let mut text = String::with_capacity(s.len());
    let mut origin = Vec::with_capacity(s.len());
    let mut pending: Option<(usize, usize)> = None;
    for (i, c) in s.char_indices() {
        let span = (i, i + c.len_utf8());
        if c.is_whitespace() {
            if !text.is_empty() && pending.is_none() {
                pending = Some(span);
            }
            continue;
        }
        if let Some(ws) = pending.take() {
            text.push(' ');
            origin.push(ws);
        }
        let mut push = |ch: char| {
            let before = text.len();
            text.push(ch);
            origin.extend(std::iter::repeat_n(span, text.len() - before));
        };
        if fold_case {
            c.to_lowercase().for_each(&mut push);
        } else {
            push(c);
        }
    }
    Normalized { text, origin }
}

impl Normalized {
    /// Original byte spans of every (possibly overlapping) occurrence.
    fn find_all(&self, pat: &str) -> Vec<(usize, usize)> {
        if pat.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut from = 0;
        while let Some(p) = self.text[from..].find(pat) {
            let at = from + p;
            out.push((self.origin[at].0, self.origin[at + pat.len() - 1].1));
            from = at + self.text[at..].chars().next().map_or(1, char::len_utf8);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlagConfig {
    pub case_insensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaMatch {
    pub sample_id: String,
    /// Byte spans in the document text.
    pub sentence_spans: Vec<(usize, usize)>,
    pub option_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlagResult {
    pub matches: Vec<QaMatch>,
    /// Samples skipped because their last sentence is empty.
    pub skipped: usize,
}

pub fn flag_qa_overlap(doc: &Document, samples: &[EvalSample], cfg: &FlagConfig) -> FlagResult {
    let norm = normalize(&doc.text, cfg.case_insensitive);
    let mut res = FlagResult::default();
    for s in samples {
        let Some(q) = &s.question else { continue };
        let sentence = normalize(last_sentence(q), cfg.case_insensitive).text;
        if sentence.is_empty() {
            res.skipped += 1;
            continue;
        }
        let sentence_spans = norm.find_all(&sentence);
        if sentence_spans.is_empty() {
            continue;
        }
        let mut option_spans: Vec<(usize, usize)> = s
            .options
            .iter()
            .flat_map(|o| norm.find_all(&normalize(o, cfg.case_insensitive).text))
            .collect();
        if option_spans.is_empty() {
            continue;
        }
        option_spans.sort_unstable();
        option_spans.dedup();
        res.matches.push(QaMatch { sample_id: s.id.clone(), sentence_spans, option_spans });
    }
    res
}

/// Deletes every matched span (merged first) and records `decontam_flags`
/// and `decontam_bytes_removed` in the metadata.
pub fn excise_matches(doc: &Document, matches: &[QaMatch]) -> Document {
    if matches.is_empty() {
        return doc.clone();
    }
    let mut spans: Vec<(usize, usize)> = matches
        .iter()
        .flat_map(|m| m.sentence_spans.iter().chain(&m.option_spans).copied())
        .filter(|(s, e)| s < e && *e <= doc.text.len())
        .collect();
    spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let mut text = doc.text.clone();
    let mut removed = 0;
    for &(s, e) in merged.iter().rev() {
        let left_ws = s == 0 || text[..s].ends_with(char::is_whitespace);
        let mut end = e;
        if left_ws {
            end += text[e..].len() - text[e..].trim_start().len();
        }
        removed += end - s;
        text.replace_range(s..end, "");
    }
    let trimmed = text.trim_end();
    removed += text.len() - trimmed.len();
    text.truncate(trimmed.len());
    let prior = |k: &str| doc.metadata.get(k).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let mut out = doc.clone();
    out.metadata.insert("decontam_flags".into(), (prior("decontam_flags") + matches.len()).to_string());
    out.metadata.insert("decontam_bytes_removed".into(), (prior("decontam_bytes_removed") + removed).to_string());
    if text.is_empty() {
        out.metadata.insert("decontam_emptied".into(), "true".into());
    }
    out.text = text;
    out
}

/// Flags and excises until no sample matches. Returns the cleaned document
/// and the number of passes that removed something.
pub fn decontaminate(doc: &Document, samples: &[EvalSample], cfg: &FlagConfig) -> (Document, usize) {
    let mut cur = doc.clone();
    let mut passes = 0;
    loop {
        let res = flag_qa_overlap(&cur, samples, cfg);
        if res.matches.is_empty() {
            return (cur, passes);
        }
        let next = excise_matches(&cur, &res.matches);
        passes += 1;
        if next.text.len() == cur.text.len() {
            return (next, passes);
        }
        cur = next;
    }
}
