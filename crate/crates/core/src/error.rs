use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Grid or parameter set that cannot support the requested computation.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("query point ({x:.4}, {y:.4}, {z:.4}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("query point ({x:.4}, {y:.4}, {z:.4}) lies in a cell touching the obstacle interior")]
    InObstacle { x: f64, y: f64, z: f64 },

    #[error("bad magic bytes {found:?}, expected \"ESDF\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported map version {0}")]
    UnsupportedVersion(u32),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("truncated map file: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("trial setup error: {0}")]
    Setup(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("{path}: missing required input")]
    MissingInput { path: PathBuf },

    #[error("{path}: malformed record at line {line}: {message}")]
    MalformedInput {
        path: PathBuf,
        line: u64,
        message: String,
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
