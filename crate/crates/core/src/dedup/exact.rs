use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::hash::hash_str128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactKey {
    #[default]
    RawText,
    /// Lowercased, whitespace runs collapsed to one space, trimmed.
    NormalizedText,
}

pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// `true` for documents to keep: the first occurrence of each key.
pub fn exact_dedup_mask(docs: &[Document], key: ExactKey) -> Vec<bool> {
    let mut seen = HashSet::with_capacity(docs.len());
    docs.iter()
        .map(|d| {
            let h = match key {
                ExactKey::RawText => hash_str128(&d.text, 0),
                ExactKey::NormalizedText => hash_str128(&normalize_text(&d.text), 0),
            };
            seen.insert(h)
        })
        .collect()
}

pub fn exact_dedup(docs: Vec<Document>, key: ExactKey) -> Vec<Document> {
    let mask = exact_dedup_mask(&docs, key);
    docs.into_iter().zip(mask).filter_map(|(d, k)| k.then_some(d)).collect()
}
