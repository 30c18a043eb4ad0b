use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("heuristic denominator is zero on edge ({u}, {v})")]
    ZeroDenominator { u: usize, v: usize },

    #[error("no edge between nodes {0} and {1}")]
    MissingEdge(usize, usize),

    #[error("node {0} has no unvisited neighbor")]
    DeadEnd(usize),

    #[error("no route from node {from} to any unvisited node")]
    Unreachable { from: usize },

    #[error("non-positive tour cost {0}")]
    NonPositiveCost(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("node {0} has an empty neighborhood")]
    IsolatedNode(usize),

    #[error("backward pass requires a train-mode forward cache")]
    MissingCache,

    #[error("instance too large for the exact oracle: {n} nodes (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("exact oracle requires a complete graph")]
    NotComplete,

    #[error("learned method requires a model checkpoint, none found at {0:?}")]
    MissingCheckpoint(Option<PathBuf>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
