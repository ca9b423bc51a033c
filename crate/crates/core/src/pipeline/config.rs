use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{MapperKind, Pipeline, PipelineError, Scope};
use crate::corpus::ShardPolicy;

/// `{"stages": [...], "globals": [...], "seed"?, "tokenizer"?, "shards"?, "shard_policy"?}`
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub globals: Vec<GlobalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `unicode` (default) or `whitespace`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<String>,
    /// Shard count for sharded runs; defaults to [`PipelineConfig::DEFAULT_SHARDS`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shards: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shard_policy: Option<ShardPolicy>,
}

impl PipelineConfig {
    pub const DEFAULT_SHARDS: usize = 16;

    pub fn shard_count(&self) -> usize {
        self.shards.unwrap_or(Self::DEFAULT_SHARDS)
    }

    /// Pretty JSON with sorted parameter keys; reloading it gives an equal config.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub kind: MapperKind,
    pub name: String,
    /// Unique stage id; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default = "empty_object")]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Stage id this global follows; `null` means the end of the pipeline.
    #[serde(default)]
    pub after: Option<String>,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

pub(crate) fn parse_config(text: &str) -> Result<PipelineConfig, PipelineError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        PipelineError::config(if path == "." { "<root>".to_string() } else { path }, e.inner())
    })
}

/// Parses and builds a pipeline; relative paths in params resolve against
/// the working directory.
pub fn load_pipeline_config(text: &str) -> Result<Pipeline, PipelineError> {
    load_pipeline_config_with_base(text, Path::new("."))
}

/// As [`load_pipeline_config`], resolving relative paths against `base`.
pub fn load_pipeline_config_with_base(text: &str, base: &Path) -> Result<Pipeline, PipelineError> {
    let cfg = parse_config(text)?;
    super::build_pipeline(&cfg, base)
}
