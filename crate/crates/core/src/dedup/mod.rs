//! Deduplication: exact, Bloom-filter paragraph/document (BFF), MinHash-LSH
//! and suffix-array substring removal.

mod bff;
mod bloom;
mod exact;
mod minhash;
mod suffix;

pub use bff::{bff_dedup, bff_process_document, false_mark_bound, BffConfig, BffOutcome};
pub use bloom::{bloom_optimal_k, bloom_optimal_m, bloom_false_positive_rate, BloomFilter};
pub use exact::{exact_dedup, exact_dedup_mask, normalize_text, ExactKey};
pub use minhash::{
    band_curve_distance, calibrate_bands, calibrate_bands_with, minhash_cluster, minhash_detect_prob,
    minhash_signature, BudgetMode, Calibration, DupCluster, MinHashConfig, MinHashSignature,
};
pub use suffix::{repeated_token_mask, suffix_dedup, suffix_dedup_with, SuffixConfig};

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("document {0:?} has no tokens")]
    EmptyDocument(String),
    #[error("signatures come from different MinHash configurations")]
    MixedConfig,
    #[error("corpus has {tokens} tokens, over the in-memory limit of {limit}; shard the corpus and run per shard")]
    MemoryBudget { tokens: usize, limit: usize },
    #[error("bad Bloom snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
