use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),

    #[error("unknown preset `{0}`")]
    Lookup(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid {what}: {message}")]
    Validation { what: String, message: String },

    #[error("scene generation failed after {attempts} attempts: {constraint}")]
    Generation { attempts: u32, constraint: String },

    #[error("simulator state error: {0}")]
    State(String),

    #[error("start pose is in collision at ({x:.3}, {z:.3}) heading {heading:.1}")]
    Placement { x: f64, z: f64, heading: f64 },

    #[error("task error: {0}")]
    Task(String),

    #[error("goal unreachable: start in component {start_component} ({start_size} nodes), goal in component {goal_component} ({goal_size} nodes)")]
    Unreachable {
        start_component: usize,
        start_size: usize,
        goal_component: usize,
        goal_size: usize,
    },

    #[error("no reachable grid node: {0}")]
    NoReachableNode(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("corrupted shard {path}: expected digest {expected}, found {actual}")]
    Corruption {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("handshake rejected: {0}")]
    Handshake(String),

    #[error("connection error: {0}")]
    Connection(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            what: what.into(),
            message: message.into(),
        }
    }
}
