use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the distance pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("duplicate domain id `{0}`")]
    DuplicateDomain(String),

    #[error("unknown embedding-space kind `{0}` (expected `feature` or `location`)")]
    UnknownSpaceKind(String),

    #[error("undeclared embedding space `{0}`")]
    UndeclaredSpace(String),

    #[error("dimension mismatch for `{space}` in {}: declared {declared}, found {found}", path.display())]
    DimensionMismatch {
        space: String,
        path: PathBuf,
        declared: usize,
        found: usize,
    },

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("malformed row {row} in {}: {reason}", path.display())]
    MalformedRow { path: PathBuf, row: usize, reason: String },

    #[error("coordinate out of range in {} row {row}: lat={lat}, lon={lon}", path.display())]
    CoordinateOutOfRange {
        path: PathBuf,
        row: usize,
        lat: f64,
        lon: f64,
    },

    #[error("row-count mismatch in domain `{domain}`: {what} has {found} rows, expected {expected}")]
    RowCountMismatch {
        domain: String,
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("zero embedding row {row} in space `{space}` of domain `{domain}`")]
    ZeroEmbedding { domain: String, space: String, row: usize },

    #[error("bad matrix file {}: {reason}", path.display())]
    BadMatrixFile { path: PathBuf, reason: String },

    #[error("empty domain")]
    EmptyDomain,

    #[error("cannot pool an empty list of measures")]
    EmptyPool,

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("dimension mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid ground-cost configuration: {0}")]
    InvalidCostConfig(String),

    #[error("measure lacks embedding space `{0}`")]
    MissingSpace(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("weights do not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("cost matrix is {rows}x{cols} but weights are {n_src} and {n_tgt}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        n_src: usize,
        n_tgt: usize,
    },

    #[error("instance too large for exact solver: {0}")]
    TooLarge(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("K out of range: K = {k}, {available} sources available")]
    KOutOfRange { k: usize, available: usize },

    #[error("target `{0}` also appears among the sources")]
    TargetInSources(String),

    #[error(
        "insufficient data in domain `{domain}`: requested {requested}, available {available} (shortfall {shortfall})"
    )]
    InsufficientData {
        domain: String,
        requested: usize,
        available: usize,
        shortfall: usize,
    },

    #[error("missing accuracy for source `{src}` on target `{tgt}`")]
    MissingAccuracy { src: String, tgt: String },

    #[error("accuracy {value} out of range [0, 1] at ({src}, {tgt})")]
    AccuracyOutOfRange { src: String, tgt: String, value: f64 },

    #[error("degenerate in-domain accuracy for `{0}`")]
    DegenerateAccuracy(String),

    #[error("constant input: {0}")]
    ConstantInput(&'static str),

    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("no overlapping pairs between distance table and accuracy table")]
    NoOverlappingPairs,

    #[error("unknown reference `{0}`")]
    UnknownReference(String),

    #[error("no valid distances from reference `{0}`")]
    EmptyMap(String),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidCostConfig(_)
            | Error::InvalidSolverConfig(_)
            | Error::KOutOfRange { .. }
            | Error::TargetInSources(_)
            | Error::UnknownFormat(_) => ErrorClass::Usage,
            Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
