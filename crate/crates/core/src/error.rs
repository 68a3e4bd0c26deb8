use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("mesh validation failed: {0}")]
    Validation(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid value: {0}")]
    Value(String),

    #[error("non-manifold surface: {0}")]
    NonManifold(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("voxel resolution too large: {0}")]
    Resolution(String),

    #[error("no feasible candidate: {0}")]
    NoFeasibleCandidate(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
