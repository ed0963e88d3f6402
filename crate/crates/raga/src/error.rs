//! Crate-wide error type and process exit-code mapping.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("input too short: need at least {need} samples, got {got}")]
    InputTooShort { need: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("invalid pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("class labels differ across runs: {0}")]
    LabelMismatch(String),
    #[error("unknown model: {0}")]
    UnknownModel(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image failure: {0}")]
    Image(#[from] image::ImageError),
    #[error("wav failure: {0}")]
    Wav(String),
}

impl Error {
    /// Process exit code: 2 usage, 3 data error, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::UnknownModel(_) => 2,
            Error::NumericFailure(_) => 4,
            _ => 3,
        }
    }

    /// Machine-parsable error class for stderr reporting.
    pub fn class(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FileNotFound",
            Error::UnsupportedEncoding(_) => "UnsupportedEncoding",
            Error::CorruptHeader(_) => "CorruptHeader",
            Error::EmptyInput(_) => "EmptyInput",
            Error::InputTooShort { .. } => "InputTooShort",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ClassOutOfRange { .. } => "ClassOutOfRange",
            Error::InvalidPair(_, _) => "InvalidPair",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::EmptySplit(_) => "EmptySplit",
            Error::LabelMismatch(_) => "LabelMismatch",
            Error::UnknownModel(_) => "UnknownModel",
            Error::NumericFailure(_) => "NumericFailure",
            Error::Usage(_) => "Usage",
            Error::Io(_) => "IoFailure",
            Error::Csv(_) => "CsvFailure",
            Error::Json(_) => "JsonFailure",
            Error::Image(_) => "ImageFailure",
            Error::Wav(_) => "WavFailure",
        }
    }
}
