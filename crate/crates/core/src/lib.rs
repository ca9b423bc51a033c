pub mod corpus;
pub mod extract;
pub mod hash;
pub mod heuristics;
pub mod dedup;
pub mod quality;
pub mod decontam;
pub mod metrics;
pub mod mixing;
pub mod pipeline;
pub mod baseline;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/bloom.md")]
    mod bloom {}
    #[doc = include_str!("../../../book/src/minhash.md")]
    mod minhash {}
    #[doc = include_str!("../../../book/src/suffix.md")]
    mod suffix {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/decontamination.md")]
    mod decontamination {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
