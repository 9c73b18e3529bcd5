use thiserror::Error;

use crate::event::{ReplicaId, Timestamp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("operation `{op}` is not part of datatype `{spec}`")]
    SpecMismatch { spec: String, op: String },
    #[error("query `{query}` is not supported by datatype `{spec}`")]
    UnknownQuery { spec: String, query: String },
    #[error("unknown datatype `{0}`")]
    UnknownDatatype(String),
    #[error("unregistered key `{0}`")]
    UnregisteredKey(String),
    #[error("datatype `{0}` has no binary merge")]
    NoBinaryMerge(String),
    #[error("replica {0} is not active")]
    InactiveReplica(ReplicaId),
    #[error("replica {0} is already active")]
    ReplicaExists(ReplicaId),
    #[error("unknown version v{0}")]
    UnknownVersion(usize),
    #[error("timestamp {0} is already in use")]
    StaleTimestamp(Timestamp),
    #[error("rc relation has a cycle through `{0}`")]
    RcCycle(String),
    #[error("extension cap must be positive")]
    ZeroCap,
    #[error("unknown verification condition `{0}`")]
    UnknownVc(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
