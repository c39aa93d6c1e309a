use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::TierLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid utf-8 input: {0}")]
    Encoding(String),
    #[error("tier regression: cannot move a {from} record to {to}")]
    TierRegression { from: TierLabel, to: TierLabel },
    #[error("shard tier mismatch: shard is {expected}, record {id} is {found}")]
    ShardTier {
        expected: TierLabel,
        found: TierLabel,
        id: String,
    },
    #[error("unknown record id {0}")]
    UnknownId(String),
    #[error("broken lineage: {child} references missing parent {missing}")]
    BrokenLineage { child: String, missing: String },
    #[error("lineage cycle through {0}")]
    LineageCycle(String),
    #[error("lineage root {0} is not an L0 record")]
    LineageRoot(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("record {0} has no snapshot id (required for per-snapshot scope)")]
    MissingSnapshot(String),
    #[error("empty seed set: {0}")]
    EmptySeedSet(&'static str),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("index file: {0}")]
    IndexFormat(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("dangling evidence chunk {0}")]
    DanglingEvidence(String),
    #[error("fact already has terminal status {0}")]
    StatusTransition(String),
    #[error("infeasible schedule: {}", .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; "))]
    Shortfall(Vec<crate::schedule::Shortfall>),
    #[error("pool {0} exhausted during materialization")]
    PoolExhausted(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
