use std::fmt;

/// Errors produced by the set-query LSH library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("angle is undefined for the zero vector")]
    ZeroVector,

    #[error("point has norm {norm}, outside the unit ball")]
    OutsideUnitBall { norm: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("set-query has {got} points, family expects {expected}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("operand kind mismatch: {0}")]
    KindMismatch(&'static str),

    #[error("weighted expansion needs k' = {needed} repeated points, cap is {cap}")]
    MultiplicityCap { needed: u64, cap: u64 },

    #[error("structure needs {needed} hash tables, budget is {cap}")]
    TableBudget { needed: u64, cap: u64 },

    #[error("structure needs {count} quantized sub-structures, cap is {cap}")]
    StructureCap { count: u64, cap: u64 },

    #[error("query rejected: {0}")]
    QueryRejected(String),

    #[error("point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at {location}: {reason}")]
    Parse { location: Location, reason: String },

    #[error("snapshot format version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    #[error("corrupt snapshot: {0}")]
    Snapshot(String),

    #[error("rational arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_point(index: usize, source: Error) -> Self {
        Error::AtPoint {
            index,
            source: Box::new(source),
        }
    }

    /// True for errors caused by input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::AtPoint { .. }
                | Error::Parse { .. }
                | Error::SnapshotVersion { .. }
                | Error::Snapshot(_)
                | Error::Io(_)
                | Error::DimensionMismatch { .. }
                | Error::OutsideUnitBall { .. }
                | Error::ZeroVector
        )
    }
}

/// Position of a malformed record in an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Offset(o) => write!(f, "byte offset {o}"),
        }
    }
}
