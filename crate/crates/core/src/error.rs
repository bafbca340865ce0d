use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class. The CLI maps these onto its exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    ReselectionRequired,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },

    #[error("mask dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: malformed JSON at line {line}, column {column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing asset: {}", .0.display())]
    MissingAsset(PathBuf),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no candidates at frame {frame}")]
    NoCandidates { frame: usize },

    #[error("candidate index {index} out of range at frame {frame} ({count} candidates)")]
    InvalidSelection {
        frame: usize,
        index: usize,
        count: usize,
    },

    #[error("re-selection required at frame {frame}")]
    ReselectionRequired { frame: usize },

    #[error("wrong phase: {0}")]
    WrongPhase(String),

    #[error("empty background sequence")]
    EmptyBackground,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::ReselectionRequired { .. } => ErrorClass::ReselectionRequired,
            Error::Io { .. } | Error::Image { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    /// Stable machine-readable name used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroDimension { .. } => "zero_dimension",
            Error::Format(_) => "format",
            Error::Json { .. } => "json",
            Error::MissingAsset(_) => "missing_asset",
            Error::Validation(_) => "validation",
            Error::NoCandidates { .. } => "no_candidates",
            Error::InvalidSelection { .. } => "invalid_selection",
            Error::ReselectionRequired { .. } => "reselection_required",
            Error::WrongPhase(_) => "wrong_phase",
            Error::EmptyBackground => "empty_background",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
        }
    }

    /// Frame the error refers to, when there is one.
    pub fn frame(&self) -> Option<usize> {
        match self {
            Error::NoCandidates { frame }
            | Error::InvalidSelection { frame, .. }
            | Error::ReselectionRequired { frame } => Some(*frame),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        let path = path.into();
        match source {
            image::ImageError::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Error::MissingAsset(path)
            }
            image::ImageError::IoError(e) => Error::Io { path, source: e },
            image::ImageError::Decoding(_) | image::ImageError::Unsupported(_) => {
                Error::Format(format!("{}: {source}", path.display()))
            }
            source => Error::Image { path, source },
        }
    }

    pub(crate) fn dims(left: (u32, u32), right: (u32, u32)) -> Self {
        Error::DimensionMismatch {
            left_width: left.0,
            left_height: left.1,
            right_width: right.0,
            right_height: right.1,
        }
    }
}
