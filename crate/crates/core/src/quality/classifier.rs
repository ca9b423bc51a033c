use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{QualityError, QualityScorer};
use crate::corpus::{Document, Tokenizer};
use crate::hash::hash_tokens;

const MAGIC: &[u8; 4] = b"NGC1";
const FEATURE_SEED: u64 = 0x6E67_6331;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub bucket_count: usize,
    /// n-gram orders used as features, each in 1..=32.
    pub orders: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 5, learning_rate: 0.5, bucket_count: 1 << 21, orders: vec![1, 2], seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub examples: usize,
    pub train_accuracy: f64,
    pub final_loss: f64,
}

/// Logistic regression over hashed, length-normalized n-gram counts of
/// lowercased tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramClassifier {
    pub bucket_count: usize,
    /// Bit `n - 1` set when order `n` is a feature.
    pub orders: u32,
    pub weights: Vec<f32>,
    pub bias: f64,
}

fn order_mask(orders: &[usize]) -> Result<u32, QualityError> {
    let mut mask = 0u32;
    for &n in orders {
        if !(1..=32).contains(&n) {
            return Err(QualityError::InvalidParameter(format!("order {n} not in 1..=32")));
        }
        mask |= 1 << (n - 1);
    }
    if mask == 0 {
        return Err(QualityError::InvalidParameter("no feature orders".into()));
    }
    Ok(mask)
}

/// Sparse feature vector: sorted bucket indices with summed weights
/// totalling 1.
fn featurize(text: &str, bucket_count: usize, orders: u32) -> Vec<(u32, f32)> {
    let lower = text.to_lowercase();
    let tokens = Tokenizer::default().tokenize(&lower);
    let mut idx: Vec<u32> = Vec::new();
    for n in 1..=32usize {
        if orders & (1 << (n - 1)) == 0 || tokens.len() < n {
            continue;
        }
        for g in tokens.windows(n) {
            idx.push((hash_tokens(g, FEATURE_SEED) % bucket_count as u64) as u32);
        }
    }
    if idx.is_empty() {
        return Vec::new();
    }
    let w = 1.0 / idx.len() as f32;
    idx.sort_unstable();
    let mut out: Vec<(u32, f32)> = Vec::new();
    for i in idx {
        match out.last_mut() {
            Some((j, v)) if *j == i => *v += w,
            _ => out.push((i, w)),
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl NgramClassifier {
    pub fn zeros(bucket_count: usize, orders: u32) -> Self {
        NgramClassifier { bucket_count, orders, weights: vec![0.0; bucket_count], bias: 0.0 }
    }

    fn dot(&self, x: &[(u32, f32)]) -> f64 {
        self.bias + x.iter().map(|&(i, v)| self.weights[i as usize] as f64 * v as f64).sum::<f64>()
    }

    pub fn logit(&self, text: &str) -> f64 {
        self.dot(&featurize(text, self.bucket_count, self.orders))
    }

    /// Probability of the positive class. Empty text gives `sigmoid(bias)`.
    pub fn probability(&self, text: &str) -> f64 {
        sigmoid(self.logit(text))
    }

    /// Layout, little-endian: magic `NGC1`, bucket_count u64, orders u32,
    /// bias f64, then `bucket_count` f32 weights.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), QualityError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.bucket_count as u64).to_le_bytes())?;
        w.write_all(&self.orders.to_le_bytes())?;
        w.write_all(&self.bias.to_le_bytes())?;
        for x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, QualityError> {
        let mut head = [0u8; 24];
        r.read_exact(&mut head).map_err(|_| QualityError::Model("truncated header".into()))?;
        if &head[..4] != MAGIC {
            return Err(QualityError::Model("wrong magic".into()));
        }
        let bucket_count = u64::from_le_bytes(head[4..12].try_into().unwrap()) as usize;
        let orders = u32::from_le_bytes(head[12..16].try_into().unwrap());
        let bias = f64::from_le_bytes(head[16..24].try_into().unwrap());
        if bucket_count == 0 || orders == 0 {
            return Err(QualityError::Model("empty feature space".into()));
        }
        let mut raw = vec![0u8; bucket_count * 4];
        r.read_exact(&mut raw).map_err(|_| QualityError::Model("truncated weights".into()))?;
        let weights: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(QualityError::Model("non-finite parameters".into()));
        }
        Ok(NgramClassifier { bucket_count, orders, weights, bias })
    }

    pub fn save(&self, path: &Path) -> Result<(), QualityError> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl QualityScorer for NgramClassifier {
    fn name(&self) -> &str {
        "ngram-classifier"
    }

    fn score(&self, doc: &Document) -> Result<f64, QualityError> {
        Ok(self.probability(&doc.text))
    }
}

pub fn score_document(model: &NgramClassifier, doc: &Document) -> f64 {
    model.probability(&doc.text)
}

/// Plain SGD on the logistic loss, one shuffled pass per epoch.
pub fn train_classifier(
    pos: &[Document],
    neg: &[Document],
    cfg: &TrainConfig,
) -> Result<(NgramClassifier, TrainReport), QualityError> {
    if pos.is_empty() {
        return Err(QualityError::EmptyClass("positive"));
    }
    if neg.is_empty() {
        return Err(QualityError::EmptyClass("negative"));
    }
    if cfg.bucket_count == 0 || cfg.bucket_count > u32::MAX as usize {
        return Err(QualityError::InvalidParameter("bucket_count must be in 1..=2^32-1".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(QualityError::InvalidParameter("learning_rate must be positive".into()));
    }
    let orders = order_mask(&cfg.orders)?;
    let data: Vec<(Vec<(u32, f32)>, f64)> = pos
        .iter()
        .map(|d| (featurize(&d.text, cfg.bucket_count, orders), 1.0))
        .chain(neg.iter().map(|d| (featurize(&d.text, cfg.bucket_count, orders), 0.0)))
        .collect();
    let mut model = NgramClassifier::zeros(cfg.bucket_count, orders);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let g = sigmoid(model.dot(x)) - y;
            for &(j, v) in x {
                model.weights[j as usize] -= (lr * g * v as f64) as f32;
            }
            model.bias -= lr * g;
        }
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (x, y) in &data {
        let p = sigmoid(model.dot(x)).clamp(1e-12, 1.0 - 1e-12);
        correct += usize::from((p >= 0.5) == (*y == 1.0));
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    let report = TrainReport {
        examples: data.len(),
        train_accuracy: correct as f64 / data.len() as f64,
        final_loss: loss / data.len() as f64,
    };
    Ok((model, report))
}
