//! Documents, JSONL corpora, sharding and token counting.

mod document;
mod io;
mod shard;
mod tokenize;

pub use document::Document;
pub use io::{
    read_corpus, read_jsonl, write_jsonl, Compression, CorpusError, JsonlReader, RecordError,
};
pub use shard::{concat_shards, shard_corpus, Shard, ShardPolicy};
pub use tokenize::{count_tokens, ExternalTokenizer, Tokenizer};
