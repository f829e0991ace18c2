use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the pipeline.
///
/// Each variant maps onto one of the process exit codes used by the CLI
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("stream error at index {index}: {reason}")]
    Stream { index: usize, reason: String },

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("snapshot already carries noise")]
    AlreadyNoisy,

    #[error("singular innovation covariance (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },

    #[error("model file: {0}")]
    Model(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// 2 for configuration problems, 4 for numerical failures, 3 for
    /// everything data related.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Singular { .. } | Error::Numerical(_) => 4,
            Error::Trial { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, kind: ParseErrorKind) -> Self {
        Error::Parse {
            path: path.into(),
            source: ParseError { line, kind },
        }
    }
}

/// A line-numbered problem found while reading an input file.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number; 0 when the file as a whole is at fault.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("file contains no records")]
    Empty,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("non-finite value in field `{0}`")]
    NonFinite(String),
    #[error("time does not increase ({prev} then {next})")]
    NonMonotoneTime { prev: f64, next: f64 },
    #[error("irregular sampling: expected spacing {expected}, found {found}")]
    IrregularSpacing { expected: f64, found: f64 },
    #[error("t_idx went backwards ({prev} then {next})")]
    IndexRegression { prev: u64, next: u64 },
    #[error("duplicate record for t_idx={t_idx}, rx={rx}")]
    DuplicateKey { t_idx: u64, rx: u64 },
}
