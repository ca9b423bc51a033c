use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{QualityError, QualityScorer};
use crate::corpus::Document;

fn keep_count(n: usize, keep: f64) -> usize {
    ((keep * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

fn check_keep(keep: f64) -> Result<(), QualityError> {
    if keep > 0.0 && keep <= 1.0 {
        Ok(())
    } else {
        Err(QualityError::InvalidParameter(format!("keep fraction must be in (0,1], got {keep}")))
    }
}

/// The `ceil(keep * N)`-th largest score. Every score `>= t` is kept, so
/// ties at `t` can push the kept share above `keep`.
pub fn percentile_threshold(scores: &[f64], keep: f64) -> Result<f64, QualityError> {
    check_keep(keep)?;
    let mut s: Vec<f64> = scores.iter().copied().filter(|x| !x.is_nan()).collect();
    if s.is_empty() {
        return Err(QualityError::NoScores);
    }
    let k = keep_count(s.len(), keep);
    let (_, t, _) = s.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    Ok(*t)
}

/// One-pass quantile sketch with a stack of sorted compactors (Manku,
/// Rajagopalan and Lindsay). Each level holds at most `k` items; a full
/// level is sorted and every other item moves up with doubled weight.
///
/// The rank of any returned value is off by at most about
/// `N * log2(N / k) / k` from the exact rank.
#[derive(Debug, Clone)]
pub struct QuantileSketch {
    k: usize,
    levels: Vec<Vec<f64>>,
    count: u64,
    flip: bool,
}

impl QuantileSketch {
    pub fn new(k: usize) -> Self {
        QuantileSketch { k: k.max(2), levels: vec![Vec::new()], count: 0, flip: false }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn insert(&mut self, x: f64) {
        if x.is_nan() {
            return;
        }
        self.count += 1;
        self.levels[0].push(x);
        let mut h = 0;
        while self.levels[h].len() >= self.k {
            let mut buf = std::mem::take(&mut self.levels[h]);
            buf.sort_by(f64::total_cmp);
            let offset = usize::from(self.flip);
            self.flip = !self.flip;
            if self.levels.len() == h + 1 {
                self.levels.push(Vec::new());
            }
            self.levels[h + 1].extend(buf.into_iter().skip(offset).step_by(2));
            h += 1;
        }
    }

    /// Documented worst-case rank error.
    pub fn rank_error_bound(&self) -> f64 {
        let n = self.count as f64;
        let k = self.k as f64;
        if n <= k {
            0.0
        } else {
            n * (n / k).log2() / k
        }
    }

    /// Approximate `ceil(keep * N)`-th largest value.
    pub fn threshold(&self, keep: f64) -> Result<f64, QualityError> {
        check_keep(keep)?;
        if self.count == 0 {
            return Err(QualityError::NoScores);
        }
        let mut items: Vec<(f64, u64)> = self
            .levels
            .iter()
            .enumerate()
            .flat_map(|(h, l)| l.iter().map(move |&x| (x, 1u64 << h)))
            .collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let total: u64 = items.iter().map(|x| x.1).sum();
        let target = keep_count(total as usize, keep) as u64;
        let mut acc = 0;
        for (x, w) in &items {
            acc += w;
            if acc >= target {
                return Ok(*x);
            }
        }
        Ok(items.last().unwrap().0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ThresholdMode {
    /// Sort all scores.
    #[default]
    Exact,
    /// [`QuantileSketch`] with compactor size `k`.
    Sketch { k: usize },
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub documents: Vec<Document>,
    pub threshold: f64,
    /// Documents the scorer failed on; they are dropped.
    pub errors: usize,
}

/// Keep flags per document, the threshold, and the scorer error count.
/// Documents the scorer fails on are never kept.
pub fn quality_filter_mask(
    docs: &[Document],
    scorer: &dyn QualityScorer,
    keep: f64,
    mode: ThresholdMode,
) -> Result<(Vec<bool>, f64, usize), QualityError> {
    check_keep(keep)?;
    let scores: Vec<Option<f64>> = docs
        .par_iter()
        .map(|d| scorer.score(d).ok().filter(|s| !s.is_nan()))
        .collect();
    let errors = scores.iter().filter(|s| s.is_none()).count();
    let valid: Vec<f64> = scores.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Ok((vec![false; docs.len()], f64::INFINITY, errors));
    }
    let threshold = match mode {
        ThresholdMode::Exact => percentile_threshold(&valid, keep)?,
        ThresholdMode::Sketch { k } => {
            let mut sk = QuantileSketch::new(k);
            valid.iter().for_each(|&x| sk.insert(x));
            sk.threshold(keep)?
        }
    };
    let mask = scores.iter().map(|s| s.is_some_and(|s| s >= threshold)).collect();
    Ok((mask, threshold, errors))
}

/// Scores every document, then keeps those at or above the `keep`
/// percentile threshold, in input order.
pub fn quality_filter(
    docs: Vec<Document>,
    scorer: &dyn QualityScorer,
    keep: f64,
    mode: ThresholdMode,
) -> Result<FilterOutput, QualityError> {
    let (mask, threshold, errors) = quality_filter_mask(&docs, scorer, keep, mode)?;
    let documents = docs.into_iter().zip(mask).filter_map(|(d, k)| k.then_some(d)).collect();
    Ok(FilterOutput { documents, threshold, errors })
}
