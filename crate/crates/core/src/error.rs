use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are split into input validation problems (bad directions, bad
/// geometry, malformed sequences) and runtime failures (solver residuals, IO).
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction ({nx}, {ny}, {nz}) is not a unit vector (norm {norm})")]
    NonUnitDirection { nx: f64, ny: f64, nz: f64, norm: f64 },

    #[error("cannot normalize a zero-length direction")]
    ZeroDirection,

    #[error("direction set must contain at least one direction")]
    EmptyDirectionSet,

    #[error("sign pattern has length {pattern} but direction set has {directions} directions")]
    LengthMismatch { pattern: usize, directions: usize },

    #[error("index {index} out of range for {len} directions")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("partial assignment fixes no index")]
    EmptyAssignment,

    #[error("too many free indices to enumerate: {free} (limit {limit})")]
    TooManyFreeIndices { free: usize, limit: usize },

    #[error("direction {index} is not planar (nz = {nz})")]
    NotPlanar { index: usize, nz: f64 },

    #[error("unsupported direction count {n}: {reason}")]
    UnsupportedSize { n: usize, reason: &'static str },

    #[error("pair indices must differ (got {0} twice)")]
    SameIndex(usize),

    #[error("constraint residual {residual:e} exceeds tolerance {tolerance:e}")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("mode {0} cannot be sampled per trial")]
    NotSampleable(&'static str),

    #[error("mode {0} does not support this operation")]
    UnsupportedMode(&'static str),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("nonpositive segment duration {0}")]
    NonPositiveDuration(f64),

    #[error("path needs at least two points and one duration per segment")]
    MalformedPath,

    #[error("binning mismatch between patterns")]
    BinningMismatch,

    #[error("malformed device sequence: {0}")]
    MalformedSequence(String),

    #[error("beam state is not normalized (squared norm {0})")]
    UnnormalizedBeam(f64),

    #[error("wavefunction is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("grid size {0} is not a power of two")]
    GridSize(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for problems with the inputs rather than with the computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Infeasible { .. } | Error::Io(_) | Error::Csv(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
