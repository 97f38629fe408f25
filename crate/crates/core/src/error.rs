use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Malformed binary input (IDX or weight files). `offset` is the byte at
/// which the problem was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte offset {offset}")]
pub struct FormatError {
    pub offset: usize,
    pub kind: FormatErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatErrorKind {
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("unexpected end of data: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("payload size mismatch: header declares {declared} bytes, {available} available")]
    SizeMismatch { declared: usize, available: usize },
    #[error("trailing data: {extra} bytes after declared payload")]
    TrailingData { extra: usize },
    #[error("invalid value {value:#04x}: {reason}")]
    InvalidValue { value: u8, reason: &'static str },
    #[error("invalid dimension: {0}")]
    BadDimension(String),
}

impl FormatError {
    pub fn new(offset: usize, kind: FormatErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid technology profile `{name}`: {reason}")]
    InvalidTechnology { name: String, reason: String },

    #[error("invalid fabric configuration: {0}")]
    InvalidFabric(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("layer {layer} tile {tile}: {source}")]
    Tile {
        layer: usize,
        tile: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("system has {unknowns} unknowns, dense oracle limit is {limit}")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("dense factorization failed: matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("solution is not converged")]
    Unconverged,

    #[error("SNR baseline must be positive, got {0}")]
    ZeroBaseline(f64),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NotPositiveDefinite | Error::Unconverged => true,
            Error::Tile { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
