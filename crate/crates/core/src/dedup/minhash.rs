use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::corpus::{Document, Tokenizer};
use crate::hash::{hash_tokens, splitmix64};

/// Mersenne prime 2^61 - 1, the modulus of the permutation family.
const P61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinHashConfig {
    pub ngram_size: usize,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
}

impl Default for MinHashConfig {
    fn default() -> Self {
        MinHashConfig { ngram_size: 5, bands: 93, rows: 15, seed: 0x5EED_0F_DA7A }
    }
}

impl MinHashConfig {
    pub fn permutations(&self) -> usize {
        self.bands * self.rows
    }

    pub fn validate(&self) -> Result<(), DedupError> {
        if self.ngram_size == 0 || self.bands == 0 || self.rows == 0 {
            return Err(DedupError::InvalidParameter("ngram_size, bands and rows must be >= 1".into()));
        }
        Ok(())
    }

    /// Per-permutation `(a, b)` with `a in [1, p)` and `b in [0, p)`.
    fn coefficients(&self) -> Vec<(u64, u64)> {
        let mut state = self.seed;
        (0..self.permutations())
            .map(|_| {
                let a = splitmix64(&mut state) % (P61 - 1) + 1;
                let b = splitmix64(&mut state) % P61;
                (a, b)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinHashSignature {
    pub id: String,
    pub config: MinHashConfig,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// Fraction of permutations on which the two minima agree.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.values.len().max(1) as f64
    }
}

fn mod_p61(v: u128) -> u64 {
    let folded = (v as u64 & P61) + (v >> 61) as u64;
    let r = (folded & P61) + (folded >> 61);
    if r >= P61 {
        r - P61
    } else {
        r
    }
}

/// Base hashes of a token sequence's shingles; fewer tokens than
/// `ngram_size` gives a single shingle of all of them.
pub(crate) fn shingle_hashes(tokens: &[&str], ngram_size: usize, seed: u64) -> Vec<u64> {
    if tokens.len() < ngram_size {
        return vec![hash_tokens(tokens, seed)];
    }
    tokens.windows(ngram_size).map(|g| hash_tokens(g, seed)).collect()
}

/// `b * r` minima of `(a_i h + b_i) mod (2^61 - 1)` over the shingle hashes `h`.
pub fn minhash_signature(
    doc: &Document,
    cfg: &MinHashConfig,
    tok: &Tokenizer,
) -> Result<MinHashSignature, DedupError> {
    cfg.validate()?;
    let tokens = tok.tokenize(&doc.text);
    if tokens.is_empty() {
        return Err(DedupError::EmptyDocument(doc.id.clone()));
    }
    let mut shingles: Vec<u64> = shingle_hashes(&tokens, cfg.ngram_size, cfg.seed)
        .into_iter()
        .map(|h| h % P61)
        .collect();
    shingles.sort_unstable();
    shingles.dedup();
    let values = cfg
        .coefficients()
        .into_iter()
        .map(|(a, b)| {
            shingles
                .iter()
                .map(|&h| mod_p61(a as u128 * h as u128 + b as u128))
                .min()
                .unwrap()
        })
        .collect();
    Ok(MinHashSignature { id: doc.id.clone(), config: *cfg, values })
}

/// `1 - (1 - s^r)^b`.
pub fn minhash_detect_prob(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

/// Squared l2 distance between two detection curves on `s = 0, 0.01, ..., 1`.
pub fn band_curve_distance(a: (usize, usize), b: (usize, usize)) -> f64 {
    (0..=100)
        .map(|i| {
            let s = i as f64 / 100.0;
            let d = minhash_detect_prob(s, a.0, a.1) - minhash_detect_prob(s, b.0, b.1);
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMode {
    /// Only `(b, r)` with `b * r == budget`.
    #[default]
    Exact,
    /// Any `(b, r)` with `b * r <= budget`.
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub bands: usize,
    pub rows: usize,
    /// Squared l2 distance to the reference curve.
    pub distance: f64,
    /// Best distance among candidates other than the winner, if any.
    pub runner_up: Option<((usize, usize), f64)>,
}

/// Picks `(b, r)` under `budget` permutations whose detection curve is
/// closest to `reference`'s. Ties go to smaller `b * r`, then smaller `r`.
pub fn calibrate_bands_with(budget: usize, reference: (usize, usize), mode: BudgetMode) -> Calibration {
    let budget = budget.max(1);
    let mut cands: Vec<((usize, usize), f64)> = Vec::new();
    for r in 1..=budget {
        match mode {
            BudgetMode::Exact => {
                if budget % r == 0 {
                    let b = budget / r;
                    cands.push(((b, r), band_curve_distance((b, r), reference)));
                }
            }
            BudgetMode::AtMost => {
                for b in 1..=budget / r {
                    cands.push(((b, r), band_curve_distance((b, r), reference)));
                }
            }
        }
    }
    cands.sort_by(|x, y| {
        x.1.total_cmp(&y.1)
            .then((x.0 .0 * x.0 .1).cmp(&(y.0 .0 * y.0 .1)))
            .then(x.0 .1.cmp(&y.0 .1))
    });
    let ((bands, rows), distance) = cands[0];
    Calibration { bands, rows, distance, runner_up: cands.get(1).copied() }
}

/// [`calibrate_bands_with`] using [`BudgetMode::Exact`].
pub fn calibrate_bands(budget: usize, reference: (usize, usize)) -> (usize, usize) {
    let c = calibrate_bands_with(budget, reference, BudgetMode::Exact);
    (c.bands, c.rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DupCluster {
    /// Sorted member ids.
    pub members: Vec<String>,
    pub retained: String,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of "agree on every row of some band". Singletons
/// are not reported. Each cluster keeps its smallest id.
pub fn minhash_cluster(sigs: &[MinHashSignature]) -> Result<Vec<DupCluster>, DedupError> {
    let Some(first) = sigs.first() else {
        return Ok(Vec::new());
    };
    let cfg = first.config;
    if sigs.iter().any(|s| s.config != cfg || s.values.len() != cfg.permutations()) {
        return Err(DedupError::MixedConfig);
    }
    let mut parent: Vec<usize> = (0..sigs.len()).collect();
    for band in 0..cfg.bands {
        let range = band * cfg.rows..(band + 1) * cfg.rows;
        let mut seen: HashMap<&[u64], usize> = HashMap::new();
        for (i, s) in sigs.iter().enumerate() {
            let key = &s.values[range.clone()];
            match seen.get(key) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    seen.insert(key, i);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<String>> = HashMap::new();
    for i in 0..sigs.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(sigs[i].id.clone());
    }
    let mut clusters: Vec<DupCluster> = groups
        .into_values()
        .filter(|m| m.len() > 1)
        .map(|mut members| {
            members.sort();
            DupCluster { retained: members[0].clone(), members }
        })
        .collect();
    clusters.sort_by(|a, b| a.retained.cmp(&b.retained));
    Ok(clusters)
}
