use std::io;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variant names double as the machine-readable error tags emitted by the
/// command-line front end, so they are part of the public interface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("file has {0} channels; select one explicitly")]
    MultichannelWithoutFlag(u16),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("empty input")]
    EmptyInput,
    #[error("requested {rows} rows for {len} values")]
    RowsExceedLength { rows: usize, len: usize },
    #[error("value {value} at index {index} outside [0, 255]")]
    OutOfRange { index: usize, value: f64 },
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("permutation length must be positive")]
    ZeroLength,
    #[error("mapping is not a bijection")]
    NotABijection,
    #[error("input too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("manifest does not match clip: {0}")]
    ManifestMismatch(String),
    #[error("bad frequency range [{min}, {max}] Hz")]
    BadFrequencyRange { min: f64, max: f64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("gap [{start}, {end}) outside signal of length {len}")]
    GapOutOfRange { start: usize, end: usize, len: usize },
    #[error("gaps overlap at sample {0}")]
    OverlappingGaps(usize),
    #[error("no training rows outside the gaps")]
    EmptyTrainSet,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("manifest declares no gaps")]
    NoGaps,
    #[error("gap touches the signal edge; no neighbor to interpolate from")]
    GapTouchesEdge,
    #[error("autocorrelation has zero energy")]
    SingularToeplitz,
    #[error("gap at {start} needs {needed} context samples on each side")]
    InsufficientContext { start: usize, needed: usize },
    #[error("gap system is not positive definite")]
    SingularSystem,
    #[error("requested gaps do not fit: {0}")]
    DoesNotFit(String),
    #[error("reference signal is all zeros")]
    ZeroReference,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable tag naming the variant, e.g. `"UnsupportedEncoding"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io(_) => "IoError",
            Error::NotWav(_) => "NotWav",
            Error::UnsupportedEncoding(_) => "UnsupportedEncoding",
            Error::MultichannelWithoutFlag(_) => "MultichannelWithoutFlag",
            Error::TruncatedFile(_) => "TruncatedFile",
            Error::EmptyInput => "EmptyInput",
            Error::RowsExceedLength { .. } => "RowsExceedLength",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::NonPositiveSigma(_) => "NonPositiveSigma",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::ZeroLength => "ZeroLength",
            Error::NotABijection => "NotABijection",
            Error::TooShort { .. } => "TooShort",
            Error::ManifestMismatch(_) => "ManifestMismatch",
            Error::BadFrequencyRange { .. } => "BadFrequencyRange",
            Error::NonFinite { .. } => "NonFinite",
            Error::GapOutOfRange { .. } => "GapOutOfRange",
            Error::OverlappingGaps(_) => "OverlappingGaps",
            Error::EmptyTrainSet => "EmptyTrainSet",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoGaps => "NoGaps",
            Error::GapTouchesEdge => "GapTouchesEdge",
            Error::SingularToeplitz => "SingularToeplitz",
            Error::InsufficientContext { .. } => "InsufficientContext",
            Error::SingularSystem => "SingularSystem",
            Error::DoesNotFit(_) => "DoesNotFit",
            Error::ZeroReference => "ZeroReference",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
