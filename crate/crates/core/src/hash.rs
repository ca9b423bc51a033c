//! Stable hashing shared by the dedup, quality and decontamination stages.
//!
//! Everything that ends up in a snapshot file or decides which document
//! survives goes through these functions, so they must not change between
//! releases. xxh3 is specified byte-for-byte and does not depend on the
//! platform or the Rust version.

use xxhash_rust::xxh3::{xxh3_128_with_seed, xxh3_64_with_seed};

/// Byte placed after every token when hashing a token sequence. It can never
/// occur inside UTF-8 text, so `["ab", "c"]` and `["a", "bc"]` hash apart.
const TOKEN_TERMINATOR: u8 = 0xFF;

pub fn hash_str(s: &str, seed: u64) -> u64 {
    xxh3_64_with_seed(s.as_bytes(), seed)
}

pub fn hash_str128(s: &str, seed: u64) -> u128 {
    xxh3_128_with_seed(s.as_bytes(), seed)
}

fn token_bytes(tokens: &[&str], buf: &mut Vec<u8>) {
    buf.clear();
    for t in tokens {
        buf.extend_from_slice(t.as_bytes());
        buf.push(TOKEN_TERMINATOR);
    }
}

/// 64-bit hash of a token n-gram.
pub fn hash_tokens(tokens: &[&str], seed: u64) -> u64 {
    let mut buf = Vec::with_capacity(tokens.iter().map(|t| t.len() + 1).sum());
    token_bytes(tokens, &mut buf);
    xxh3_64_with_seed(&buf, seed)
}

/// 128-bit hash of a token n-gram.
pub fn hash_tokens128(tokens: &[&str], seed: u64) -> u128 {
    let mut buf = Vec::with_capacity(tokens.iter().map(|t| t.len() + 1).sum());
    token_bytes(tokens, &mut buf);
    xxh3_128_with_seed(&buf, seed)
}

/// SplitMix64 step. Used to expand one user seed into a stream of
/// independent-looking 64-bit constants.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
