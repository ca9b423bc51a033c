use serde::{Deserialize, Serialize};

use super::{BloomFilter, DedupError};
use crate::corpus::{Document, Tokenizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BffConfig {
    pub min_ngram_size: usize,
    pub max_ngram_size: usize,
    pub threshold: f64,
    pub eps: f64,
    /// Expected insert count used to size the filter. When absent the
    /// corpus tokens are counted first.
    pub expected_tokens: Option<u64>,
}

impl Default for BffConfig {
    fn default() -> Self {
        BffConfig {
            min_ngram_size: 13,
            max_ngram_size: 13,
            threshold: 0.8,
            eps: 0.01,
            expected_tokens: None,
        }
    }
}

impl BffConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.min_ngram_size < 1 || self.min_ngram_size > self.max_ngram_size {
            return Err(DedupError::InvalidParameter(
                "need 1 <= min_ngram_size <= max_ngram_size".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(DedupError::InvalidParameter(format!(
                "threshold must be in (0,1], got {}",
                self.threshold
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(DedupError::InvalidParameter(format!("eps must be in (0,1), got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BffOutcome {
    /// `None` when the whole document was removed.
    pub document: Option<Document>,
    /// Indices of removed paragraphs (lines).
    pub removed_paragraphs: Vec<usize>,
    pub total_ngrams: u64,
    pub contained_ngrams: u64,
}

/// Runs one document through the paragraph and document rules, inserting its
/// n-grams into `filter` as it goes.
pub fn bff_process_document(
    doc: &Document,
    filter: &BloomFilter,
    cfg: &BffConfig,
    tok: &Tokenizer,
) -> BffOutcome {
    let (min, max) = (cfg.min_ngram_size, cfg.max_ngram_size);
    let mut total = 0u64;
    let mut contained = 0u64;
    let mut removed = Vec::new();
    let mut kept: Vec<&str> = Vec::new();

    for (idx, para) in doc.text.split('\n').enumerate() {
        let tokens = tok.tokenize(para);
        let t = tokens.len();
        if t < min {
            kept.push(para);
            continue;
        }
        if t <= max {
            total += 1;
            if filter.check_and_insert(&tokens) {
                contained += 1;
                removed.push(idx);
            } else {
                kept.push(para);
            }
            continue;
        }
        let hashes: Vec<u128> = tokens.windows(max).map(|g| filter.hash(g)).collect();
        let hits: Vec<bool> = hashes.iter().map(|&h| filter.contains_hash(h)).collect();
        let n = hashes.len() as u64;
        let c = hits.iter().filter(|&&b| b).count() as u64;
        total += n;
        contained += c;
        if c as f64 / n as f64 > cfg.threshold {
            removed.push(idx);
        } else {
            for (h, hit) in hashes.iter().zip(&hits) {
                if !hit {
                    filter.check_and_insert_hash(*h);
                }
            }
            kept.push(para);
        }
    }

    let drop_doc = total > 0 && contained as f64 / total as f64 > cfg.threshold;
    let document = if drop_doc {
        None
    } else if removed.is_empty() {
        Some(doc.clone())
    } else {
        let mut d = doc.clone();
        d.text = kept.join("\n");
        Some(d)
    };
    BffOutcome {
        document,
        removed_paragraphs: removed,
        total_ngrams: total,
        contained_ngrams: contained,
    }
}

/// Sequential BFF over a corpus with a fresh filter. Outcomes are in input
/// order; the filter is returned for snapshotting.
pub fn bff_dedup(
    docs: &[Document],
    cfg: &BffConfig,
    tok: &Tokenizer,
    seed: u64,
) -> Result<(Vec<BffOutcome>, BloomFilter), DedupError> {
    cfg.validate()?;
    let n = match cfg.expected_tokens {
        Some(n) => n,
        None => docs.iter().map(|d| tok.count(&d.text) as u64).sum(),
    };
    let filter = BloomFilter::new(n.max(1), cfg.eps, seed)?;
    let out = docs.iter().map(|d| bff_process_document(d, &filter, cfg, tok)).collect();
    Ok((out, filter))
}

/// Hoeffding bound on the probability that a document with `n` n-grams, `s`
/// of them genuinely seen before, is pushed over `t` by false positives:
/// `exp(-2 (t n - s - eps (n - s))^2 / (n - s))`.
///
/// Returns 1 when `n == s` or when the expected count already reaches the
/// threshold, where the bound says nothing.
pub fn false_mark_bound(n: u64, s: u64, t: f64, eps: f64) -> Result<f64, DedupError> {
    if s > n {
        return Err(DedupError::InvalidParameter(format!("S={s} exceeds N={n}")));
    }
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&eps) {
        return Err(DedupError::InvalidParameter("T and eps must lie in [0,1]".into()));
    }
    if n == s {
        return Ok(1.0);
    }
    let free = (n - s) as f64;
    let dev = t * n as f64 - s as f64 - eps * free;
    if dev <= 0.0 {
        return Ok(1.0);
    }
    Ok((-2.0 * dev * dev / free).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(prefix: &str, n: usize) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn cfg() -> BffConfig {
        BffConfig { expected_tokens: Some(10_000), ..Default::default() }
    }

    #[test]
    fn short_paragraphs_untouched() {
        let f = BloomFilter::new(1000, 0.01, 0).unwrap();
        let d = Document::new("a", format!("{}\n{}", words("x", 5), words("y", 12)));
        let o = bff_process_document(&d, &f, &cfg(), &Tokenizer::default());
        assert_eq!(o.document.as_ref(), Some(&d));
        assert_eq!((o.total_ngrams, o.contained_ngrams), (0, 0));
        assert_eq!(f.count_ones(), 0);
    }

    #[test]
    fn identical_thirty_token_documents() {
        let f = BloomFilter::new(1000, 0.01, 0).unwrap();
        let tok = Tokenizer::default();
        let a = Document::new("a", words("w", 30));
        let b = Document::new("b", words("w", 30));
        let oa = bff_process_document(&a, &f, &cfg(), &tok);
        assert_eq!((oa.total_ngrams, oa.contained_ngrams), (18, 0));
        assert!(oa.document.is_some());
        let ob = bff_process_document(&b, &f, &cfg(), &tok);
        assert_eq!((ob.total_ngrams, ob.contained_ngrams), (18, 18));
        assert!(ob.document.is_none());
        assert_eq!(ob.removed_paragraphs, vec![0]);
    }

    #[test]
    fn exact_size_paragraph_is_one_ngram() {
        let f = BloomFilter::new(1000, 0.01, 0).unwrap();
        let tok = Tokenizer::default();
        let p = words("p", 13);
        let a = Document::new("a", format!("{p}\n{}", words("q", 40)));
        let b = Document::new("b", format!("{}\n{p}\n{}", words("r", 40), words("s", 3)));
        bff_process_document(&a, &f, &cfg(), &tok);
        let o = bff_process_document(&b, &f, &cfg(), &tok);
        assert_eq!(o.removed_paragraphs, vec![1]);
        assert_eq!((o.total_ngrams, o.contained_ngrams), (29, 1));
        assert_eq!(o.document.unwrap().text, format!("{}\n{}", words("r", 40), words("s", 3)));
    }

    #[test]
    fn removed_document_still_inserts() {
        let f = BloomFilter::new(1000, 0.01, 0).unwrap();
        let tok = Tokenizer::default();
        let c = BffConfig { threshold: 0.5, ..cfg() };
        // 3 duplicated exact-size paragraphs and 1 fresh one: 3/4 > 0.5.
        let dup: Vec<String> = (0..3).map(|i| words(&format!("d{i}_"), 13)).collect();
        bff_process_document(&Document::new("a", dup.join("\n")), &f, &c, &tok);
        let fresh = words("fresh", 13);
        let b = Document::new("b", format!("{}\n{fresh}", dup.join("\n")));
        assert!(bff_process_document(&b, &f, &c, &tok).document.is_none());
        let probe = Document::new("c", fresh);
        assert_eq!(bff_process_document(&probe, &f, &c, &tok).contained_ngrams, 1);
    }

    #[test]
    fn bound_values() {
        let b = false_mark_bound(100, 60, 0.8, 0.01).unwrap();
        assert!((b.ln() + 19.208).abs() < 1e-9);
        assert!(b < 1e-8);
        assert_eq!(false_mark_bound(10, 10, 0.8, 0.01).unwrap(), 1.0);
        // t n = s + eps (n - s)
        assert_eq!(false_mark_bound(100, 50, 0.505, 0.01).unwrap(), 1.0);
        assert!(false_mark_bound(100, 60, 0.9, 0.01).unwrap() < b);
        assert!(false_mark_bound(5, 6, 0.8, 0.01).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BffConfig::default().validate().is_ok());
        assert!(BffConfig { min_ngram_size: 0, ..Default::default() }.validate().is_err());
        assert!(BffConfig { min_ngram_size: 20, ..Default::default() }.validate().is_err());
        assert!(BffConfig { threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(BffConfig { threshold: 1.0, ..Default::default() }.validate().is_ok());
    }
}
