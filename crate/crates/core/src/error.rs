use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,
    #[error("signal is all zeros; no normalization gain exists")]
    ZeroSignal,
    #[error("sample {index} out of range: {value}")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported audio format: {0}")]
    Format(String),

    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported bitstream version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("truncated data: needed {needed} more bytes while reading {what}")]
    Truncated { what: &'static str, needed: usize },
    #[error("{0} trailing bytes after end of bitstream")]
    TrailingData(usize),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("unknown model type tag {0}")]
    UnknownModelTag(u8),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("signal too short: {len} samples, need more than {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("insufficient history: {have} samples, predictor needs {need}")]
    InsufficientHistory { have: usize, need: usize },

    #[error("invalid autocorrelation: non-positive prediction error at order {order}")]
    InvalidAutocorrelation { order: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("code {code} does not fit in {bits} bits")]
    CodeOutOfRange { code: u32, bits: u8 },
    #[error("no frames retained for SEGSNR")]
    NoRetainedFrames,
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) => Error::Io(e),
            other => Error::Format(other.to_string()),
        }
    }
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::Io(_)
            | Error::Format(_)
            | Error::BadMagic(_)
            | Error::VersionMismatch { .. }
            | Error::Truncated { .. }
            | Error::TrailingData(_)
            | Error::InvalidHeader(_)
            | Error::UnknownModelTag(_)
            | Error::CodeOutOfRange { .. } => 2,
            _ => 3,
        }
    }
}
