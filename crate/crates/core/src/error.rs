use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Problems with an FGN model file.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected FGNET01\\n, found {found:?}")]
    MagicMismatch { found: Vec<u8> },

    #[error("truncated model file: expected {expected} bytes of {section}, found {found}")]
    Truncated {
        section: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("header declares {declared} parameters but the payload holds {actual}")]
    LengthMismatch { declared: usize, actual: usize },

    #[error("invalid header: {0}")]
    Header(String),
}

/// Problems with input datasets (IDX and CSV).
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    #[error("IDX dimensions overflow: {0:?}")]
    IdxOverflow(Vec<u32>),

    #[error("truncated IDX payload: expected {expected} bytes, found {found}")]
    IdxTruncated { expected: usize, found: usize },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("row {row}, column {column:?}: cannot parse {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("csv: {0}")]
    Csv(String),

    #[error("invalid dataset: {0}")]
    Invalid(String),
}
