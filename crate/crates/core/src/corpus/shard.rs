use serde::{Deserialize, Serialize};

use super::{CorpusError, Document};
use crate::hash::hash_str;

/// A slice of the corpus processed independently of the others.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Shard {
    pub index: usize,
    pub documents: Vec<Document>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShardPolicy {
    /// Document `i` goes to shard `i % n`.
    #[default]
    RoundRobin,
    /// Shard chosen by a stable hash of the document id. Independent of
    /// input order and of the machine.
    HashOfId,
    /// Consecutive runs of roughly equal size; concatenation gives back the
    /// input unchanged.
    Contiguous,
}

const SHARD_HASH_SEED: u64 = 0x5348_4152_4421; // "SHARD!"

pub fn shard_corpus(
    docs: Vec<Document>,
    num_shards: usize,
    policy: ShardPolicy,
) -> Result<Vec<Shard>, CorpusError> {
    if num_shards == 0 {
        return Err(CorpusError::ZeroShards);
    }
    let mut shards: Vec<Shard> = (0..num_shards)
        .map(|index| Shard {
            index,
            documents: Vec::new(),
        })
        .collect();
    let total = docs.len();
    for (i, doc) in docs.into_iter().enumerate() {
        let target = match policy {
            ShardPolicy::RoundRobin => i % num_shards,
            ShardPolicy::HashOfId => (hash_str(&doc.id, SHARD_HASH_SEED) % num_shards as u64) as usize,
            ShardPolicy::Contiguous => {
                // first `total % n` shards get one extra document
                let base = total / num_shards;
                let extra = total % num_shards;
                let cut = extra * (base + 1);
                if i < cut {
                    i / (base + 1)
                } else {
                    extra + (i - cut) / base.max(1)
                }
            }
        };
        shards[target].documents.push(doc);
    }
    Ok(shards)
}

/// Concatenates shards in index order.
pub fn concat_shards(mut shards: Vec<Shard>) -> Vec<Document> {
    shards.sort_by_key(|s| s.index);
    shards.into_iter().flat_map(|s| s.documents).collect()
}
