use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty vector: positive vectors need at least one entry")]
    Empty,

    #[error("entry {index} = {value:e} is not a finite value above the positivity floor")]
    NotPositive { index: usize, value: f64 },

    #[error("entry {index} = {value:e} is negative or not finite")]
    Negative { index: usize, value: f64 },

    #[error("invalid normalization: {0}")]
    InvalidNormalization(&'static str),

    #[error("invalid exponent: gamma[{index}] = {value}; exponents must be nonzero")]
    InvalidExponent { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("spectral radius {rho} is not below 1; no contraction certificate")]
    NoCertificate { rho: f64 },

    #[error("spectral radius is zero; no Perron vector exists")]
    ZeroSpectralRadius,

    #[error("kernel has {entries} entries, above the brute-force cap of {cap}; use a closed form")]
    TooLarge { entries: usize, cap: usize },

    #[error("mode index {index} out of range for order {order}")]
    ModeIndex { index: usize, order: usize },

    #[error("operator value overflowed even in log domain")]
    Overflow,

    #[error("precondition failed: {0}")]
    Precondition(&'static str),

    #[error("computed norm {norm} exceeds the Hilbert-type bound {bound}")]
    BoundViolated { norm: f64, bound: f64 },

    #[error("map evaluation failed: {0}")]
    Map(&'static str),
}
