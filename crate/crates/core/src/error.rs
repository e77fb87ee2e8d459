use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid dimensions: {0}")]
    InvalidShape(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("inverse transform is not real: imaginary residue {residue:e} exceeds {tolerance:e}")]
    SymmetryViolation { residue: f64, tolerance: f64 },
    #[error("regularisation parameter must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("noise standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("whiteness is undefined for an all-zero signal")]
    ZeroSignal,
    #[error("residual spectrum vanishes in every alias group; whiteness is undefined")]
    ZeroResidualSpectrum,
    #[error("dense system is singular")]
    SingularSystem,
    #[error("kernel band must be odd, got {0}")]
    EvenBand(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("images are identical; the metric is infinite")]
    IdenticalImages,
    #[error(
        "discrepancy target {target:e} outside reachable residual range [{low:e}, {high:e}]"
    )]
    TargetUnreachable { target: f64, low: f64, high: f64 },
    #[error("unsupported image format at byte {offset}: {reason}")]
    UnsupportedFormat { offset: usize, reason: String },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("truncated data at byte {offset}: expected {expected} bytes")]
    TruncatedData { offset: usize, expected: usize },
    #[error("malformed metadata line {line}: {reason}")]
    MalformedMeta { line: usize, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}
