use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("truncated binary STL: header declares {declared} facets but only {found} are present")]
    TruncatedStl { declared: u32, found: usize },

    #[error("ASCII STL parse error at line {line}: {message}")]
    AsciiStl { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coincident points: {0}")]
    CoincidentPoints(String),

    #[error("no viable seed points on {0} set")]
    NoSeedPoints(&'static str),

    #[error("no straight candidates")]
    NoStraightCandidates,

    #[error("no arc candidates")]
    NoArcCandidates,

    #[error("no viable channel")]
    NoViableChannel,

    #[error("internal error: {0}")]
    Internal(String),
}
