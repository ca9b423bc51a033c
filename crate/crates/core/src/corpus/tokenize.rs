use std::fmt;
use std::sync::Arc;

use unicode_segmentation::UnicodeSegmentation;

use super::Document;

/// A tokenizer supplied by the caller, e.g. a wrapper around a BPE model.
///
/// Tokens must be slices of the input text, returned with their byte offsets
/// in increasing order. Stages that excise text rely on the offsets.
pub trait ExternalTokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn token_spans<'a>(&self, text: &'a str) -> Vec<(usize, &'a str)>;
}

/// How text is split into tokens.
///
/// `UnicodeWords` is the reference behaviour: UAX #29 word-boundary segments
/// with whitespace-only segments discarded. Punctuation segments such as `-`
/// or `,` count as tokens.
#[derive(Clone, Default)]
pub enum Tokenizer {
    #[default]
    UnicodeWords,
    Whitespace,
    External(Arc<dyn ExternalTokenizer>),
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tokenizer::UnicodeWords => f.write_str("UnicodeWords"),
            Tokenizer::Whitespace => f.write_str("Whitespace"),
            Tokenizer::External(t) => write!(f, "External({})", t.name()),
        }
    }
}

impl Tokenizer {
    /// Parses the config spelling: `"unicode"` or `"whitespace"`.
    pub fn from_name(name: &str) -> Option<Tokenizer> {
        match name {
            "unicode" | "unicode-words" => Some(Tokenizer::UnicodeWords),
            "whitespace" => Some(Tokenizer::Whitespace),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Tokenizer::UnicodeWords => "unicode",
            Tokenizer::Whitespace => "whitespace",
            Tokenizer::External(t) => t.name(),
        }
    }

    pub fn token_spans<'a>(&self, text: &'a str) -> Vec<(usize, &'a str)> {
        match self {
            Tokenizer::UnicodeWords => text
                .split_word_bound_indices()
                .filter(|(_, w)| !w.chars().all(char::is_whitespace))
                .collect(),
            Tokenizer::Whitespace => {
                let base = text.as_ptr() as usize;
                text.split_whitespace()
                    .map(|w| (w.as_ptr() as usize - base, w))
                    .collect()
            }
            Tokenizer::External(t) => t.token_spans(text),
        }
    }

    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::UnicodeWords => text
                .split_word_bounds()
                .filter(|w| !w.chars().all(char::is_whitespace))
                .collect(),
            Tokenizer::Whitespace => text.split_whitespace().collect(),
            Tokenizer::External(t) => t.token_spans(text).into_iter().map(|(_, s)| s).collect(),
        }
    }

    pub fn count(&self, text: &str) -> usize {
        match self {
            Tokenizer::UnicodeWords => text
                .split_word_bounds()
                .filter(|w| !w.chars().all(char::is_whitespace))
                .count(),
            Tokenizer::Whitespace => text.split_whitespace().count(),
            Tokenizer::External(t) => t.token_spans(text).len(),
        }
    }
}

pub fn count_tokens(doc: &Document, tok: &Tokenizer) -> usize {
    tok.count(&doc.text)
}
