use std::path::{Path, PathBuf};

use corefqa::curation::RankOrder;
use corefqa::http::EndpointConfig;
use serde::{Deserialize, Serialize};

use crate::ServeError;

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

/// Which sentence scorer backs the bias preview.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerConfig {
    /// TF-IDF fitted on the sentences of the passage corpus.
    #[default]
    Tfidf,
    Embedding(EndpointConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Passages as a JSON array or JSON lines of `{id, text, entities?}`.
    pub corpus: PathBuf,
    /// Append-only JSONL pair log; created when missing.
    pub store: PathBuf,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub rank_order: RankOrder,
}

impl ServiceConfig {
    pub fn new(corpus: impl Into<PathBuf>, store: impl Into<PathBuf>) -> Self {
        Self {
            listen: default_listen(),
            corpus: corpus.into(),
            store: store.into(),
            scorer: ScorerConfig::default(),
            rank_order: RankOrder::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ServeError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServeError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))
    }
}
