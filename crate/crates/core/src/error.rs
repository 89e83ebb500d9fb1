use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// `Contract` and `ShapeMismatch` signal caller mistakes (bad arguments or
/// inconsistent shapes); everything else is a runtime or data failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch in {context}: {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("image `{image_id}`: {source}")]
    Image {
        image_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_image(self, image_id: &str) -> Self {
        Error::Image {
            image_id: image_id.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid arguments rather than by data or I/O.
    pub fn is_contract(&self) -> bool {
        match self {
            Error::Contract(_) | Error::ShapeMismatch { .. } => true,
            Error::Image { source, .. } => source.is_contract(),
            _ => false,
        }
    }
}

/// Structured failures when decoding one of the binary file formats.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a {expected} file (magic {found:?})")]
    BadMagic {
        expected: &'static str,
        found: Vec<u8>,
    },

    #[error("unsupported version {found} (expected {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated {
        offset: usize,
        needed: usize,
        len: usize,
    },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("malformed: {0}")]
    Malformed(String),
}
