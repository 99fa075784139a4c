use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is not on the unit sphere (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("vector is not tangent to its base point (inner product {dot})")]
    NotTangent { dot: f64 },
    #[error("log map undefined for antipodal points (inner product {dot})")]
    Antipodal { dot: f64 },
    #[error("tangent vectors live at different base points")]
    BaseMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("singular value decomposition failed to converge")]
    SvdFailure,
    #[error("eigendecomposition failed to converge")]
    EigenFailure,
    #[error("histogram range is empty ({lo} to {hi})")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("{n} samples exceeds the configured limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("affinity matrix has no edges; clustering is undefined")]
    DegenerateAffinity,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("training set is empty")]
    EmptyTrain,
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("could not place {k} centroids at separation {min_sep} after {attempts} attempts")]
    SeparationUnsatisfiable { k: usize, min_sep: f64, attempts: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
