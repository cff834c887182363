use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("sample quota too small: {total} < 50 x {patches} patches")]
    Quota { total: usize, patches: usize },

    #[error("edge {0} is a boundary edge")]
    BoundaryEdge(usize),

    #[error("patch {patch} cannot be decomposed: {reason}")]
    DecompositionFailure { patch: usize, reason: String },

    #[error("arity mismatch: expected {expected} values, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("non-finite loss at point {point:?}: {detail}")]
    NonFiniteLoss { point: [f64; 3], detail: String },

    #[error("level set is empty: no sign change in the grid")]
    EmptyLevelSet,

    #[error("empty point set")]
    EmptySet,

    #[error("no sharp feature edges found on {0}")]
    NoFeatures(&'static str),

    #[error("ground-truth mesh is not closed: {0}")]
    OpenGroundTruth(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::Topology(_) => "TopologyError",
            Error::Label(_) => "LabelError",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::Quota { .. } => "QuotaError",
            Error::BoundaryEdge(_) => "BoundaryEdge",
            Error::DecompositionFailure { .. } => "DecompositionFailure",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptyLevelSet => "EmptyLevelSet",
            Error::EmptySet => "EmptySet",
            Error::NoFeatures(_) => "NoFeatures",
            Error::OpenGroundTruth(_) => "OpenGroundTruth",
            Error::Checkpoint(_) => "CheckpointError",
            Error::Config(_) => "ConfigError",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}
