use thiserror::Error;

/// Errors produced by the mapping, I/O, and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("degenerate segment: start and end coincide at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },

    #[error("cannot merge an empty set of segments")]
    EmptyMerge,

    #[error("no pose for scan index {0}")]
    MissingPose(usize),

    #[error("no correspondence subset for map index {0}")]
    MissingSubset(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported map file version: {0:?}")]
    Version(String),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("map invariant violated: {0}")]
    Invariant(String),

    #[error("empty map: quality is undefined")]
    EmptyMap,

    #[error("worker pool: {0}")]
    WorkerPool(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            message: message.into(),
        }
    }
}
