use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel lies at or above the horizon (lambda1 = {lambda1:e})")]
    Horizon { lambda1: f64 },

    #[error("point is not in front of the camera (depth = {depth:e})")]
    BehindCamera { depth: f64 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("units mismatch: {left} vs {right}")]
    UnitsMismatch {
        left: crate::flow_models::Units,
        right: crate::flow_models::Units,
    },

    #[error("input contains no valid pixels")]
    EmptyInput,

    #[error("no pixel is valid in both maps and the mask")]
    EmptyOverlap,

    #[error("curve fit needs at least {needed} populated rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("cost is not finite for any particle")]
    NonFinite,

    #[error("rectangle {rect:?} does not fit inside a {width}x{height} image")]
    OutOfBounds {
        rect: (usize, usize, usize, usize),
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic number in flow file")]
    BadMagic,

    #[error("wrong bit depth: expected {expected}, found {found}")]
    WrongBitDepth { expected: u8, found: u8 },

    #[error("wrong channel count: expected {expected}, found {found}")]
    WrongChannelCount { expected: usize, found: usize },

    #[error("file is truncated")]
    TruncatedFile,

    #[error("png decode error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Horizon { .. } => "Horizon",
            Error::BehindCamera { .. } => "BehindCamera",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::UnitsMismatch { .. } => "UnitsMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::EmptyOverlap => "EmptyOverlap",
            Error::InsufficientRows { .. } => "InsufficientRows",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::NonFinite => "NonFinite",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::BadMagic => "BadMagic",
            Error::WrongBitDepth { .. } => "WrongBitDepth",
            Error::WrongChannelCount { .. } => "WrongChannelCount",
            Error::TruncatedFile => "TruncatedFile",
            Error::PngDecode(_) => "PngDecode",
            Error::PngEncode(_) => "PngEncode",
            Error::Json(_) => "Json",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
