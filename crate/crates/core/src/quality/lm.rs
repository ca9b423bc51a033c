use std::collections::HashMap;

use super::{QualityError, QualityScorer};
use crate::corpus::{Document, Tokenizer};

const BOS: u32 = u32::MAX;
const UNK: u32 = u32::MAX - 1;

/// Add-k smoothed n-gram language model.
///
/// `P(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k V)` with `V` the training
/// vocabulary plus one unknown-word slot. Sentences start with `order - 1`
/// BOS symbols.
#[derive(Debug, Clone)]
pub struct NgramLm {
    order: usize,
    k: f64,
    tokenizer: Tokenizer,
    vocab: HashMap<String, u32>,
    ngrams: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, u64>,
}

impl NgramLm {
    pub fn train(docs: &[Document], order: usize, k: f64, tokenizer: Tokenizer) -> Result<Self, QualityError> {
        if order == 0 {
            return Err(QualityError::InvalidParameter("order must be >= 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(QualityError::InvalidParameter("k must be positive".into()));
        }
        let mut lm = NgramLm {
            order,
            k,
            tokenizer,
            vocab: HashMap::new(),
            ngrams: HashMap::new(),
            contexts: HashMap::new(),
        };
        for d in docs {
            let ids: Vec<u32> = lm
                .tokenizer
                .tokenize(&d.text)
                .into_iter()
                .map(|t| {
                    let next = lm.vocab.len() as u32;
                    *lm.vocab.entry(t.to_string()).or_insert(next)
                })
                .collect();
            for g in lm.padded(&ids).windows(order) {
                *lm.ngrams.entry(g.to_vec()).or_default() += 1;
                *lm.contexts.entry(g[..order - 1].to_vec()).or_default() += 1;
            }
        }
        Ok(lm)
    }

    /// Order 3, k = 0.01, default tokenizer.
    pub fn train_default(docs: &[Document]) -> Result<Self, QualityError> {
        Self::train(docs, 3, 0.01, Tokenizer::default())
    }

    fn padded(&self, ids: &[u32]) -> Vec<u32> {
        let mut v = vec![BOS; self.order - 1];
        v.extend_from_slice(ids);
        v
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Vocabulary size including the unknown-word slot.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    fn id(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(UNK)
    }

    /// `P(word | context)` where `context` holds exactly `order - 1` ids.
    fn prob_ids(&self, context: &[u32], word: u32) -> f64 {
        let mut g = context.to_vec();
        g.push(word);
        let c = self.ngrams.get(&g).copied().unwrap_or(0) as f64;
        let cc = self.contexts.get(context).copied().unwrap_or(0) as f64;
        (c + self.k) / (cc + self.k * self.vocab_size() as f64)
    }

    /// Conditional probability of `word` after `context` (last `order - 1`
    /// tokens used; shorter contexts are BOS-padded).
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ids: Vec<u32> = context.iter().map(|t| self.id(t)).collect();
        let padded = self.padded(&ids);
        let ctx = &padded[padded.len() - (self.order - 1)..];
        self.prob_ids(ctx, self.id(word))
    }

    /// Every known word plus the unknown slot, for normalization checks.
    pub fn vocabulary(&self) -> Vec<&str> {
        self.vocab.keys().map(String::as_str).collect()
    }

    /// `exp` of the mean negative log-probability per token.
    pub fn perplexity(&self, text: &str) -> Result<f64, QualityError> {
        let ids: Vec<u32> = self.tokenizer.tokenize(text).into_iter().map(|t| self.id(t)).collect();
        if ids.is_empty() {
            return Err(QualityError::EmptyDocument(String::new()));
        }
        let padded = self.padded(&ids);
        let nll: f64 = padded
            .windows(self.order)
            .map(|g| -self.prob_ids(&g[..self.order - 1], g[self.order - 1]).ln())
            .sum();
        Ok((nll / ids.len() as f64).exp())
    }
}

pub fn perplexity_score(lm: &NgramLm, doc: &Document) -> Result<f64, QualityError> {
    lm.perplexity(&doc.text).map_err(|e| match e {
        QualityError::EmptyDocument(_) => QualityError::EmptyDocument(doc.id.clone()),
        e => e,
    })
}

/// Scores documents by negated perplexity, so lower perplexity ranks higher.
#[derive(Debug, Clone)]
pub struct PerplexityScorer {
    pub lm: NgramLm,
}

impl QualityScorer for PerplexityScorer {
    fn name(&self) -> &str {
        "perplexity"
    }

    fn score(&self, doc: &Document) -> Result<f64, QualityError> {
        perplexity_score(&self.lm, doc).map(|p| -p)
    }
}
