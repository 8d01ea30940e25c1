use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unreadable, unwritable or malformed input.
    Input,
    /// Inputs were well formed but the computation is undefined on them.
    Numerical,
    /// A parameter value outside its domain.
    Usage,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"EMB1\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("truncated header: {0} bytes, need 18")]
    TruncatedHeader(usize),

    #[error("unknown modality code {0}")]
    UnknownModality(u8),

    #[error("payload length mismatch: header implies {expected} bytes, file holds {found}")]
    PayloadLengthMismatch { expected: u64, found: u64 },

    #[error("malformed id section: {0}")]
    MalformedIds(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("ragged csv row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric csv cell {cell:?} at line {line}, field {field}")]
    NonNumeric {
        line: u64,
        field: usize,
        cell: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("count mismatch: {images} images vs {texts} texts")]
    CountMismatch { images: usize, texts: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("modality mismatch: expected {expected}, found {found}")]
    ModalityMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("image and text id sets differ (first unmatched id {0:?})")]
    IdSetMismatch(String),

    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("row {row} has zero norm; cosine is undefined")]
    ZeroNorm { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-positive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("histogram edges differ")]
    EdgeMismatch,

    #[error("antipodal inputs: interpolation path is undefined")]
    Antipodal,

    #[error("covariance is singular along an eigen-direction (eigenvalue {0:e}); use a positive eigen floor")]
    Singular(f64),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::BadMagic(_)
            | Error::TruncatedHeader(_)
            | Error::UnknownModality(_)
            | Error::PayloadLengthMismatch { .. }
            | Error::MalformedIds(_)
            | Error::NonFinite { .. }
            | Error::Shape(_)
            | Error::DuplicateId(_)
            | Error::Csv(_)
            | Error::RaggedRow { .. }
            | Error::NonNumeric { .. }
            | Error::Empty(_)
            | Error::CountMismatch { .. }
            | Error::DimMismatch { .. }
            | Error::ModalityMismatch { .. }
            | Error::IdSetMismatch(_) => ErrorKind::Input,
            Error::TooFewSamples { .. }
            | Error::ZeroNorm { .. }
            | Error::Degenerate(_)
            | Error::NonPositiveDiagonal { .. }
            | Error::EdgeMismatch
            | Error::Antipodal
            | Error::Singular(_) => ErrorKind::Numerical,
            Error::InvalidParameter(_) => ErrorKind::Usage,
        }
    }
}
