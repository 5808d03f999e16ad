use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Io {
        path: PathBuf,
        message: String,
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("class directory {0} contains no images")]
    EmptyClass(PathBuf),
    #[error("{0} contains no class directories")]
    NoClasses(PathBuf),
    #[error("{path}: wrong magic number 0x{found:08x} (expected 0x{expected:08x})")]
    WrongMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("item count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: label byte {value} is not a digit 0-9")]
    BadLabel { path: PathBuf, value: u8 },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("{path}: {message}")]
    Probe { path: PathBuf, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate training data: {0}")]
    Degenerate(String),
    #[error("misaligned image sets at record {index}: {message}")]
    Misaligned { index: usize, message: String },
    #[error("model serialization: {0}")]
    Serialization(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
