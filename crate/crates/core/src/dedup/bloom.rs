use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use super::DedupError;
use crate::hash::hash_tokens128;

const MAGIC: &[u8; 4] = b"BFF1";

fn check_eps(eps: f64) -> Result<(), DedupError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(DedupError::InvalidParameter(format!("eps must be in (0,1), got {eps}")))
    }
}

/// `round(-ln eps / ln 2)`, at least 1.
pub fn bloom_optimal_k(eps: f64) -> Result<u32, DedupError> {
    check_eps(eps)?;
    Ok(((-eps.ln() / std::f64::consts::LN_2).round() as u32).max(1))
}

/// `(1 - e^{-kn/m})^k`.
pub fn bloom_false_positive_rate(n: u64, k: u32, m: u64) -> f64 {
    (1.0 - (-(k as f64) * n as f64 / m as f64).exp()).powi(k as i32)
}

/// Smallest `m` with `(1 - e^{-kn/m})^k <= eps`, by binary search.
pub fn bloom_optimal_m(n: u64, k: u32, eps: f64) -> Result<u64, DedupError> {
    check_eps(eps)?;
    if n == 0 || k == 0 {
        return Err(DedupError::InvalidParameter("n and k must be at least 1".into()));
    }
    let ok = |m: u64| bloom_false_positive_rate(n, k, m) <= eps;
    let mut hi = 1u64;
    while !ok(hi) {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| DedupError::InvalidParameter("filter size overflows u64".into()))?;
    }
    let mut lo = hi / 2; // fails, or 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Bit-array Bloom filter over token n-grams, safe to share across threads.
///
/// Bit positions come from one 128-bit hash split into two halves,
/// `h1 + i * h2 (mod m)` for `i in 0..k`.
#[derive(Debug)]
pub struct BloomFilter {
    m: u64,
    k: u32,
    n_target: u64,
    eps: f64,
    seed: u64,
    bits: Vec<AtomicU64>,
}

impl BloomFilter {
    /// Sized for `n_target` inserts at false-positive rate `eps`.
    pub fn new(n_target: u64, eps: f64, seed: u64) -> Result<Self, DedupError> {
        let k = bloom_optimal_k(eps)?;
        let m = bloom_optimal_m(n_target.max(1), k, eps)?;
        Ok(Self::with_params(m, k, n_target, eps, seed))
    }

    pub fn with_params(m: u64, k: u32, n_target: u64, eps: f64, seed: u64) -> Self {
        let m = m.max(1);
        let words = m.div_ceil(64) as usize;
        BloomFilter {
            m,
            k: k.max(1),
            n_target,
            eps,
            seed,
            bits: (0..words).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    pub fn m(&self) -> u64 {
        self.m
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn n_target(&self) -> u64 {
        self.n_target
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash(&self, tokens: &[&str]) -> u128 {
        hash_tokens128(tokens, self.seed)
    }

    fn positions(&self, h: u128) -> impl Iterator<Item = u64> + '_ {
        let h1 = h as u64;
        let h2 = ((h >> 64) as u64) | 1;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.m)
    }

    pub fn contains_hash(&self, h: u128) -> bool {
        self.positions(h)
            .all(|p| self.bits[(p / 64) as usize].load(Ordering::Relaxed) & (1 << (p % 64)) != 0)
    }

    /// Sets the item's bits; returns whether all of them were already set.
    pub fn check_and_insert_hash(&self, h: u128) -> bool {
        let mut present = true;
        for p in self.positions(h) {
            let mask = 1u64 << (p % 64);
            let old = self.bits[(p / 64) as usize].fetch_or(mask, Ordering::Relaxed);
            present &= old & mask != 0;
        }
        present
    }

    pub fn contains(&self, tokens: &[&str]) -> bool {
        self.contains_hash(self.hash(tokens))
    }

    pub fn check_and_insert(&self, tokens: &[&str]) -> bool {
        self.check_and_insert_hash(self.hash(tokens))
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.load(Ordering::Relaxed).count_ones() as u64).sum()
    }

    /// Copy of the bit array; bit `i` is bit `i % 64` of word `i / 64`.
    pub fn words(&self) -> Vec<u64> {
        self.bits.iter().map(|w| w.load(Ordering::Relaxed)).collect()
    }

    /// Snapshot layout, little-endian:
    ///
    /// | offset | field |
    /// |---|---|
    /// | 0 | magic `BFF1` |
    /// | 4 | m: u64 |
    /// | 12 | k: u32 |
    /// | 16 | n_target: u64 |
    /// | 24 | eps: f64 |
    /// | 32 | seed: u64 |
    /// | 40 | `ceil(m/64)` u64 words |
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), DedupError> {
        w.write_all(MAGIC)?;
        w.write_all(&self.m.to_le_bytes())?;
        w.write_all(&self.k.to_le_bytes())?;
        w.write_all(&self.n_target.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for word in &self.bits {
            w.write_all(&word.load(Ordering::Relaxed).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, DedupError> {
        let mut head = [0u8; 40];
        r.read_exact(&mut head)
            .map_err(|_| DedupError::Snapshot("truncated header".into()))?;
        if &head[0..4] != MAGIC {
            return Err(DedupError::Snapshot("wrong magic".into()));
        }
        let u64_at = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let m = u64_at(4);
        let k = u32::from_le_bytes(head[12..16].try_into().unwrap());
        let n_target = u64_at(16);
        let eps = f64::from_bits(u64_at(24));
        let seed = u64_at(32);
        if m == 0 || k == 0 {
            return Err(DedupError::Snapshot("m and k must be positive".into()));
        }
        let f = Self::with_params(m, k, n_target, eps, seed);
        let mut buf = [0u8; 8];
        for word in &f.bits {
            r.read_exact(&mut buf)
                .map_err(|_| DedupError::Snapshot("truncated bit array".into()))?;
            word.store(u64::from_le_bytes(buf), Ordering::Relaxed);
        }
        if r.read(&mut buf)? != 0 {
            return Err(DedupError::Snapshot("trailing bytes".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<(), DedupError> {
        let file = std::fs::File::create(path)?;
        self.write_snapshot(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, DedupError> {
        let file = std::fs::File::open(path)?;
        Self::read_snapshot(std::io::BufReader::new(file))
    }
}
