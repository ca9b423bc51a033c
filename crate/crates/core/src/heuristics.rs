//! Rule-based document filters in the Gopher / RefinedWeb family, and URL
//! banlists.
//!
//! Rules run in a fixed order, cheapest first, and the first one that fails
//! names the drop reason:
//!
//! 1. `word_count`
//! 2. `mean_word_length`
//! 3. `symbol_to_word_ratio`
//! 4. `fraction_alpha_words`
//! 5. `stop_word_hits`
//! 6. `dup_line_fraction`
//! 7. `dup_paragraph_fraction`
//! 8. `top_2gram_char_fraction`, `top_3gram_char_fraction`, `top_4gram_char_fraction`
//!
//! Words are whitespace-separated. Repetition fractions are measured in
//! characters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::corpus::Document;

/// The stop words counted by `stop_word_hits`.
pub const STOP_WORDS: [&str; 8] = ["the", "be", "to", "of", "and", "that", "have", "with"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicRules {
    /// Inclusive `[min, max]` word count.
    pub word_count: [usize; 2],
    /// Inclusive `[min, max]` mean word length in characters.
    pub mean_word_length: [f64; 2],
    /// Maximum of (`#` symbols + ellipses) per word.
    pub symbol_to_word_ratio: f64,
    /// Minimum share of words containing an alphabetic character.
    pub fraction_alpha_words: f64,
    /// Minimum number of stop-word occurrences.
    pub stop_word_hits: usize,
    pub dup_line_fraction: f64,
    pub dup_paragraph_fraction: f64,
    /// Maximum character share of the most frequent word n-gram, keyed by n.
    pub top_ngram_char_fraction: BTreeMap<usize, f64>,
}

impl Default for HeuristicRules {
    /// Gopher quality and repetition thresholds as adopted by RefinedWeb.
    fn default() -> Self {
        HeuristicRules {
            word_count: [50, 100_000],
            mean_word_length: [3.0, 10.0],
            symbol_to_word_ratio: 0.1,
            fraction_alpha_words: 0.8,
            stop_word_hits: 2,
            dup_line_fraction: 0.2,
            dup_paragraph_fraction: 0.2,
            top_ngram_char_fraction: [(2, 0.20), (3, 0.18), (4, 0.16)].into_iter().collect(),
        }
    }
}

impl HeuristicRules {
    /// A profile where every rule passes; tighten individual fields from here.
    pub fn permissive() -> Self {
        HeuristicRules {
            word_count: [0, usize::MAX],
            mean_word_length: [0.0, f64::MAX],
            symbol_to_word_ratio: 1.0,
            fraction_alpha_words: 0.0,
            stop_word_hits: 0,
            dup_line_fraction: 1.0,
            dup_paragraph_fraction: 1.0,
            top_ngram_char_fraction: [(2, 1.0), (3, 1.0), (4, 1.0)].into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.word_count[0] > self.word_count[1] {
            return Err("word_count: min > max".into());
        }
        let [lo, hi] = self.mean_word_length;
        if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < 0.0 {
            return Err("mean_word_length: bounds must be finite with 0 <= min <= max".into());
        }
        let ratios = [
            ("symbol_to_word_ratio", self.symbol_to_word_ratio),
            ("fraction_alpha_words", self.fraction_alpha_words),
            ("dup_line_fraction", self.dup_line_fraction),
            ("dup_paragraph_fraction", self.dup_paragraph_fraction),
        ];
        for (name, v) in ratios {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name}: {v} not in [0,1]"));
            }
        }
        for (n, v) in &self.top_ngram_char_fraction {
            if !(2..=4).contains(n) {
                return Err(format!("top_ngram_char_fraction: n={n} not in 2..=4"));
            }
            if !(0.0..=1.0).contains(v) {
                return Err(format!("top_ngram_char_fraction[{n}]: {v} not in [0,1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropReason {
    pub rule: &'static str,
    /// The measured statistic that violated the bound.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Keep,
    Drop(DropReason),
}

impl Decision {
    pub fn is_keep(&self) -> bool {
        matches!(self, Decision::Keep)
    }

    pub fn reason(&self) -> Option<&'static str> {
        match self {
            Decision::Keep => None,
            Decision::Drop(r) => Some(r.rule),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RepetitionStats {
    pub dup_line_fraction: f64,
    pub dup_paragraph_fraction: f64,
    /// Index 0, 1, 2 hold n = 2, 3, 4.
    pub top_ngram_char_fraction: [f64; 3],
}

impl RepetitionStats {
    pub fn top_ngram(&self, n: usize) -> f64 {
        self.top_ngram_char_fraction[n - 2]
    }
}

/// Character share of the units that repeat an earlier unit.
fn duplicate_char_fraction<'a>(units: impl Iterator<Item = &'a str>) -> f64 {
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut total = 0usize;
    let mut dup = 0usize;
    for u in units {
        let len = u.chars().count();
        total += len;
        if seen.insert(u, ()).is_some() {
            dup += len;
        }
    }
    if total == 0 {
        0.0
    } else {
        dup as f64 / total as f64
    }
}

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.split('\n') {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(cur.join("\n"));
                cur.clear();
            }
        } else {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur.join("\n"));
    }
    out
}

fn top_ngram_fraction(words: &[&str], n: usize) -> f64 {
    if words.len() < n {
        return 0.0;
    }
    let total: usize = words.iter().map(|w| w.chars().count()).sum();
    if total == 0 {
        return 0.0;
    }
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    for g in words.windows(n) {
        *counts.entry(g).or_default() += 1;
    }
    let best = counts
        .iter()
        .map(|(g, &c)| (c, c * g.iter().map(|w| w.chars().count()).sum::<usize>()))
        .max()
        .map(|(_, chars)| chars)
        .unwrap_or(0);
    (best as f64 / total as f64).min(1.0)
}

/// Line, paragraph and top-n-gram repetition of a text. Empty text gives zeros.
pub fn repetition_stats(text: &str) -> RepetitionStats {
    let lines = text.split('\n').filter(|l| !l.trim().is_empty());
    let paras = paragraphs(text);
    let words: Vec<&str> = text.split_whitespace().collect();
    RepetitionStats {
        dup_line_fraction: duplicate_char_fraction(lines),
        dup_paragraph_fraction: duplicate_char_fraction(paras.iter().map(String::as_str)),
        top_ngram_char_fraction: [
            top_ngram_fraction(&words, 2),
            top_ngram_fraction(&words, 3),
            top_ngram_fraction(&words, 4),
        ],
    }
}

fn strip_punct(w: &str) -> &str {
    w.trim_matches(|c: char| !c.is_alphanumeric())
}

fn drop(rule: &'static str, value: f64) -> Decision {
    Decision::Drop(DropReason { rule, value })
}

pub fn heuristic_filter(doc: &Document, rules: &HeuristicRules) -> Decision {
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    let n = words.len();
    if n < rules.word_count[0] || n > rules.word_count[1] {
        return drop("word_count", n as f64);
    }
    let nf = n.max(1) as f64;

    let mean_len = words.iter().map(|w| w.chars().count()).sum::<usize>() as f64 / nf;
    if mean_len < rules.mean_word_length[0] || mean_len > rules.mean_word_length[1] {
        return drop("mean_word_length", mean_len);
    }

    let symbols: usize = words
        .iter()
        .map(|w| w.matches('#').count() + w.matches("...").count() + w.matches('…').count())
        .sum();
    let symbol_ratio = symbols as f64 / nf;
    if symbol_ratio > rules.symbol_to_word_ratio {
        return drop("symbol_to_word_ratio", symbol_ratio);
    }

    let alpha = words.iter().filter(|w| w.chars().any(char::is_alphabetic)).count();
    let alpha_frac = if n == 0 { 0.0 } else { alpha as f64 / nf };
    if alpha_frac < rules.fraction_alpha_words {
        return drop("fraction_alpha_words", alpha_frac);
    }

    let hits = words
        .iter()
        .filter(|w| {
            let s = strip_punct(w).to_lowercase();
            STOP_WORDS.contains(&s.as_str())
        })
        .count();
    if hits < rules.stop_word_hits {
        return drop("stop_word_hits", hits as f64);
    }

    let rep = repetition_stats(&doc.text);
    if rep.dup_line_fraction > rules.dup_line_fraction {
        return drop("dup_line_fraction", rep.dup_line_fraction);
    }
    if rep.dup_paragraph_fraction > rules.dup_paragraph_fraction {
        return drop("dup_paragraph_fraction", rep.dup_paragraph_fraction);
    }
    const TOP_NAMES: [&str; 3] = [
        "top_2gram_char_fraction",
        "top_3gram_char_fraction",
        "top_4gram_char_fraction",
    ];
    for (n, max) in &rules.top_ngram_char_fraction {
        let v = rep.top_ngram(*n);
        if v > *max {
            return drop(TOP_NAMES[n - 2], v);
        }
    }
    Decision::Keep
}

/// Banned hosts and URL substrings. Hosts are stored lowercase in their
/// ASCII (punycode) form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UrlBanlist {
    pub banned_domains: BTreeSet<String>,
    pub banned_substrings: Vec<String>,
}

fn normalize_domain(d: &str) -> Option<String> {
    let d = d.trim().trim_end_matches('.').to_lowercase();
    if d.is_empty() {
        return None;
    }
    match Url::parse(&format!("http://{d}/")) {
        Ok(u) => u.host_str().map(str::to_string),
        Err(_) => Some(d),
    }
}

fn list_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl UrlBanlist {
    pub fn new<D, S>(domains: D, substrings: S) -> Self
    where
        D: IntoIterator,
        D::Item: AsRef<str>,
        S: IntoIterator,
        S::Item: AsRef<str>,
    {
        UrlBanlist {
            banned_domains: domains.into_iter().filter_map(|d| normalize_domain(d.as_ref())).collect(),
            banned_substrings: substrings
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    /// Newline-delimited files; blank lines and `#` comments are skipped.
    pub fn from_files(domains: Option<&Path>, substrings: Option<&Path>) -> std::io::Result<Self> {
        let d = domains.map(std::fs::read_to_string).transpose()?.unwrap_or_default();
        let s = substrings.map(std::fs::read_to_string).transpose()?.unwrap_or_default();
        Ok(UrlBanlist::new(list_lines(&d), list_lines(&s)))
    }
}

pub fn url_filter(doc: &Document, banlist: &UrlBanlist) -> Decision {
    if doc.url.is_empty() {
        return Decision::Keep;
    }
    if let Ok(u) = Url::parse(&doc.url) {
        if let Some(host) = u.host_str() {
            if banlist.banned_domains.contains(host) {
                return drop("banned_domain", 1.0);
            }
        }
    }
    let lowered = doc.url.to_lowercase();
    if banlist.banned_substrings.iter().any(|s| lowered.contains(s.as_str())) {
        return drop("banned_substring", 1.0);
    }
    Decision::Keep
}
