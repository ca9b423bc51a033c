use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::corpus::{Document, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuffixConfig {
    pub min_run: usize,
    /// Largest corpus, in tokens, held in memory at once.
    pub max_tokens: usize,
}

impl Default for SuffixConfig {
    fn default() -> Self {
        SuffixConfig { min_run: 50, max_tokens: 20_000_000 }
    }
}

/// Suffix array by prefix doubling.
fn suffix_array(s: &[u32]) -> Vec<usize> {
    let n = s.len();
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<u64> = s.iter().map(|&c| c as u64).collect();
    let mut tmp = vec![0u64; n];
    let mut k = 1;
    while n > 1 {
        let key = |i: usize, rank: &[u64]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i, &rank));
        tmp[sa[0]] = 0;
        for w in 1..n {
            tmp[sa[w]] = tmp[sa[w - 1]] + u64::from(key(sa[w - 1], &rank) != key(sa[w], &rank));
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1]] as usize == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai: `lcp[i]` is the common prefix of `sa[i-1]` and `sa[i]`; `lcp[0] = 0`.
fn lcp_array(s: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = s.len();
    let mut rank = vec![0usize; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p] = i;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && s[i + h] == s[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// For each sequence, which tokens lie inside a `min_run`-window that
/// already occurred earlier in corpus order.
pub fn repeated_token_mask(seqs: &[Vec<u32>], min_run: usize) -> Vec<Vec<bool>> {
    let mut mask: Vec<Vec<bool>> = seqs.iter().map(|s| vec![false; s.len()]).collect();
    if min_run == 0 {
        return mask;
    }
    let base = seqs.iter().flatten().copied().max().map_or(0, |m| m + 1);
    let mut concat = Vec::new();
    let mut owner = Vec::new();
    for (d, s) in seqs.iter().enumerate() {
        for (o, &t) in s.iter().enumerate() {
            concat.push(t);
            owner.push((d, o));
        }
        concat.push(base + d as u32);
        owner.push((d, usize::MAX));
    }
    let sa = suffix_array(&concat);
    let lcp = lcp_array(&concat, &sa);
    let mut diff: Vec<Vec<i32>> = seqs.iter().map(|s| vec![0; s.len() + 1]).collect();
    let mut i = 0;
    while i < sa.len() {
        let mut j = i + 1;
        while j < sa.len() && lcp[j] >= min_run {
            j += 1;
        }
        if j - i > 1 {
            let first = sa[i..j].iter().copied().min().unwrap();
            for &p in &sa[i..j] {
                if p != first {
                    let (d, o) = owner[p];
                    diff[d][o] += 1;
                    diff[d][o + min_run] -= 1;
                }
            }
        }
        i = j;
    }
    for (m, df) in mask.iter_mut().zip(&diff) {
        let mut acc = 0;
        for (slot, delta) in m.iter_mut().zip(df) {
            acc += delta;
            *slot = acc > 0;
        }
    }
    mask
}

/// Text with the byte spans of masked tokens cut out. Each maximal masked
/// run is removed from its first token's start to its last token's end;
/// whitespace left at the seam is collapsed.
fn excise(text: &str, spans: &[(usize, &str)], mask: &[bool]) -> String {
    if mask.iter().all(|&m| m) {
        return String::new();
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut i = 0;
    while i < spans.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = spans[i].0;
        let mut j = i;
        while j + 1 < spans.len() && mask[j + 1] {
            j += 1;
        }
        let end = spans[j].0 + spans[j].1.len();
        out.push_str(&text[cursor..start]);
        cursor = end;
        let prev_ws = out.chars().last().is_none_or(char::is_whitespace);
        if prev_ws {
            let rest = &text[cursor..];
            let next = rest.len() - rest.trim_start().len();
            let ws = &rest[..next];
            cursor += next;
            if out.is_empty() {
                // nothing before the cut
            } else if ws.contains('\n') && !out.ends_with('\n') {
                out.pop();
                out.push('\n');
            }
        }
        i = j + 1;
    }
    out.push_str(&text[cursor..]);
    out.trim().to_string()
}

pub fn suffix_dedup_with(
    docs: Vec<Document>,
    cfg: &SuffixConfig,
    tok: &Tokenizer,
) -> Result<Vec<Document>, DedupError> {
    if cfg.min_run == 0 {
        return Err(DedupError::InvalidParameter("min_run must be >= 1".into()));
    }
    let spans: Vec<Vec<(usize, &str)>> = docs.iter().map(|d| tok.token_spans(&d.text)).collect();
    let tokens: usize = spans.iter().map(Vec::len).sum();
    if tokens > cfg.max_tokens {
        return Err(DedupError::MemoryBudget { tokens, limit: cfg.max_tokens });
    }
    let mut vocab: HashMap<&str, u32> = HashMap::new();
    let seqs: Vec<Vec<u32>> = spans
        .iter()
        .map(|sp| {
            sp.iter()
                .map(|(_, t)| {
                    let next = vocab.len() as u32;
                    *vocab.entry(t).or_insert(next)
                })
                .collect()
        })
        .collect();
    let mask = repeated_token_mask(&seqs, cfg.min_run);
    let texts: Vec<Option<String>> = docs
        .iter()
        .zip(&spans)
        .zip(&mask)
        .map(|((d, sp), m)| m.iter().any(|&x| x).then(|| excise(&d.text, sp, m)))
        .collect();
    drop(spans);
    Ok(docs
        .into_iter()
        .zip(texts)
        .map(|(mut d, t)| {
            if let Some(t) = t {
                d.text = t;
            }
            d
        })
        .collect())
}

/// Removes later occurrences of every repeated run of at least `min_run`
/// tokens. Documents emptied this way are kept with empty text.
pub fn suffix_dedup(docs: Vec<Document>, min_run: usize, tok: &Tokenizer) -> Result<Vec<Document>, DedupError> {
    suffix_dedup_with(docs, &SuffixConfig { min_run, ..Default::default() }, tok)
}
