use serde::{Deserialize, Serialize};

use crate::corpus::Document;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaComment {
    #[serde(alias = "body")]
    pub text: String,
    pub score: i64,
}

/// One question page: a post and its answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPost {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, alias = "selftext")]
    pub body: String,
    pub score: i64,
    #[serde(default)]
    pub comments: Vec<QaComment>,
}

/// Pairs each post with its top-scoring comment (longest on ties), keeping
/// pairs where the post scores at least 3, the chosen comment at least 5,
/// and the post has at least 3 comments.
pub fn prep_eli5(posts: &[QaPost]) -> Vec<Document> {
    posts
        .iter()
        .filter(|p| p.score >= 3 && p.comments.len() >= 3)
        .filter_map(|p| {
            let best = p
                .comments
                .iter()
                .max_by(|a, b| a.score.cmp(&b.score).then(a.text.chars().count().cmp(&b.text.chars().count())))?;
            if best.score < 5 {
                return None;
            }
            let question = [p.title.trim(), p.body.trim()]
                .into_iter()
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join("\n");
            Some(Document::new(p.id.clone(), format!("{question}\n\n{}", best.text.trim())).with_source("eli5"))
        })
        .collect()
}
