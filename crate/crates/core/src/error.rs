use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can surface. Variants map one-to-one onto the
/// domain error names used in artifacts and on the CLI's diagnostic stream.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid json in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("graph has {nodes} nodes, exceeding the cap of {cap}")]
    CapExceeded { nodes: usize, cap: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },

    #[error("non-finite gradient for parameter {param}")]
    NonFiniteGradient { param: String },

    #[error("split '{0}' has no labeled nodes")]
    EmptySplit(&'static str),

    #[error("feature dimension mismatch: checkpoint has {checkpoint}, encoder has {encoder}")]
    FeatureDimMismatch { checkpoint: usize, encoder: usize },

    #[error("prune digest mismatch: checkpoint has {checkpoint}, graph has {graph}")]
    PruneDigestMismatch { checkpoint: String, graph: String },

    #[error("ablation results contain no <random> baseline")]
    MissingBaseline,

    #[error("all clustering feature vectors are identical")]
    DegenerateFeatures,

    #[error("no model available for cluster {0}")]
    MissingModel(usize),

    #[error("post-processing did not reach a fixpoint within {0} sweeps")]
    NonTermination(usize),

    #[error("stale anchor: {0}")]
    StaleAnchor(String),

    #[error("illegal annotation position: {0}")]
    IllegalPosition(String),

    #[error("file {0} changed since the edit plan was made")]
    HashMismatch(String),

    #[error("write failed for {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("incomparable signatures: {0}")]
    SignatureMismatch(String),

    #[error("checker failed: {0}")]
    CheckerFailed(String),

    #[error("checker not available: {0}")]
    MissingChecker(String),

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::UnsupportedConstruct(_) => "UnsupportedConstruct",
            Error::Io { .. } => "IoError",
            Error::Json { .. } => "JsonError",
            Error::Config(_) => "ConfigError",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::NonFiniteGradient { .. } => "NonFiniteGradient",
            Error::EmptySplit(_) => "EmptySplit",
            Error::FeatureDimMismatch { .. } => "FeatureDimMismatch",
            Error::PruneDigestMismatch { .. } => "PruneDigestMismatch",
            Error::MissingBaseline => "MissingBaseline",
            Error::DegenerateFeatures => "DegenerateFeatures",
            Error::MissingModel(_) => "MissingModel",
            Error::NonTermination(_) => "NonTermination",
            Error::StaleAnchor(_) => "StaleAnchor",
            Error::IllegalPosition(_) => "IllegalPosition",
            Error::HashMismatch(_) => "HashMismatch",
            Error::Write { .. } => "WriteError",
            Error::SignatureMismatch(_) => "SignatureMismatch",
            Error::CheckerFailed(_) => "CheckerFailed",
            Error::MissingChecker(_) => "MissingChecker",
            Error::FormatVersion { .. } => "FormatVersion",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
