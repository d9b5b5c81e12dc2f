//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by image construction, file I/O and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Image dimensions that are zero or whose product overflows `usize`.
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    /// Two grids that must share a shape do not.
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {got_width}x{got_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        got_width: usize,
        got_height: usize,
    },

    /// A buffer whose length does not match `width * height`.
    #[error("buffer length {len} does not match {width}x{height}")]
    BufferLength { len: usize, width: usize, height: usize },

    /// An operation that needs at least one selected pixel got none.
    #[error("mask selects no pixels")]
    EmptyMask,

    /// Gradients need at least 2 pixels along each axis.
    #[error("image too small for gradients: {width}x{height} (need at least 2x2)")]
    TooSmallForGradient { width: usize, height: usize },

    /// A raw sample exceeds the maximum representable at the bit depth.
    #[error("sample {value} exceeds maximum {max} for the bit depth")]
    SampleOutOfRange { value: u16, max: u16 },

    /// Only 8- and 16-bit grayscale are supported.
    #[error("unsupported bit depth {0} (supported: 8, 16)")]
    UnsupportedBitDepth(u32),

    /// Intensities handed to the decomposition must lie in [0, 1].
    #[error("intensity {value} at ({x}, {y}) outside [0, 1]")]
    IntensityOutOfRange { x: usize, y: usize, value: f64 },

    /// Solver option combination that cannot run.
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    /// The dense solver refuses systems above its size cap.
    #[error("linear system too large for the dense solver: {unknowns} unknowns (limit {limit})")]
    SystemTooLarge { unknowns: usize, limit: usize },

    /// Malformed or truncated image file.
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// Readable file, but not a format this crate handles.
    #[error("{path}: unsupported format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    pub(crate) fn unsupported(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::UnsupportedFormat { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
