use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no path from node {from} to node {to}")]
    NoPath { from: NodeId, to: NodeId },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("illegal action: node {action} is not adjacent to node {at}")]
    IllegalAction { at: NodeId, action: NodeId },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance with {picks} picking locations exceeds the limit of {limit}")]
    InstanceTooLarge { picks: usize, limit: usize },

    #[error("series of length {len} is shorter than the window of {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
