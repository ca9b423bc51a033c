//! Model-based quality filtering: a hashed n-gram linear classifier, an
//! n-gram language model for perplexity filtering, and percentile
//! thresholds over any [`QualityScorer`].

mod classifier;
mod eli5;
mod lm;
mod threshold;

pub use classifier::{score_document, train_classifier, NgramClassifier, TrainConfig, TrainReport};
pub use eli5::{prep_eli5, QaComment, QaPost};
pub use lm::{perplexity_score, NgramLm, PerplexityScorer};
pub use threshold::{percentile_threshold, quality_filter, quality_filter_mask, FilterOutput, QuantileSketch, ThresholdMode};

use crate::corpus::Document;

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("{0} corpus is empty")]
    EmptyClass(&'static str),
    #[error("document {0:?} has no tokens")]
    EmptyDocument(String),
    #[error("no scores to threshold")]
    NoScores,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bad model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scores a document; higher is better on the scorer's own scale.
pub trait QualityScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, doc: &Document) -> Result<f64, QualityError>;
}
