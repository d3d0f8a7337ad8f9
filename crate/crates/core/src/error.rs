use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Problems found while decoding one of the binary file formats.
/// Every variant carries the byte offset where decoding stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic at offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: u64,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported version {found} at offset {offset} (supported: {supported})")]
    UnsupportedVersion {
        offset: u64,
        found: u16,
        supported: u16,
    },

    #[error("invalid {field} = {value} at offset {offset}")]
    InvalidField {
        offset: u64,
        field: &'static str,
        value: u64,
    },

    #[error("dimension overflow in {field} at offset {offset}")]
    DimensionOverflow { offset: u64, field: &'static str },

    #[error("truncated {field} at offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        offset: u64,
        field: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: u64, extra: u64 },

    #[error("non-finite sample at offset {offset}")]
    NonFinite { offset: u64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(op: &'static str, expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> Self {
        Error::Shape {
            op,
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// 0 ok, 1 usage/config, 2 filesystem, 3 format, 4 truncation, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 1,
            Error::Io { .. } => 2,
            Error::Json { .. } => 1,
            Error::Format(FormatError::Truncated { .. }) => 4,
            Error::Format(_) | Error::Shape { .. } => 3,
            Error::Numeric(_) => 5,
        }
    }
}
