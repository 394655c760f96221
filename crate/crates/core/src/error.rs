use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid parameter supplied by the caller.
    Usage,
    /// Malformed, misaligned or otherwise unusable input data.
    Data,
    /// A numerical routine could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} has (near) zero norm and cannot be normalized")]
    ZeroVector { row: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{field} has length {found}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("identity {0} not present in feature set")]
    UnknownId(i64),

    #[error("covariance of identity {id} is singular even after regularization")]
    SingularCovariance { id: i64 },

    #[error("too few samples: n = {n} but neighbour count {k} requires n > {k}")]
    TooFewSamples { n: usize, k: usize },

    #[error("misaligned input: {0}")]
    Misalignment(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pose `{name}`: anchor keypoints coincide, body height is degenerate")]
    DegeneratePose { name: String },

    #[error("pose `{name}`: anchor keypoint {keypoint} below confidence floor")]
    MissingAnchor { name: String, keypoint: usize },

    #[error("no query has a valid gallery match")]
    NoValidQueries,

    #[error("feature set is empty after junk exclusion")]
    EmptySet,

    #[error("{path}: bad magic at byte offset 0")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported version {version} at byte offset 4")]
    VersionUnsupported { path: PathBuf, version: u32 },

    #[error("{path}: invalid header at byte offset {offset}: {message}")]
    InvalidHeader {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: truncated at byte offset {offset}, expected {expected} bytes")]
    TruncatedFile {
        path: PathBuf,
        offset: u64,
        expected: u64,
    },

    #[error("{path}: unexpected trailing data at byte offset {offset}")]
    TrailingData { path: PathBuf, offset: u64 },

    #[error("{path}: metadata has {found} rows, expected {expected}")]
    MetadataLengthMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: header mismatch: {message}")]
    HeaderMismatch {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: ragged row with {found} fields, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: pose `{name}` has {found} keypoints, expected 18")]
    BadKeypointCount {
        path: PathBuf,
        line: u64,
        name: String,
        found: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::ZeroVector { .. }
            | Error::SingularCovariance { .. }
            | Error::DegeneratePose { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
