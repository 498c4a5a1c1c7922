use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mean vector entry {index} = {value} is outside [0, 1]")]
    InvalidMean { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty batch")]
    EmptyBatch,

    /// A Poisson budget exceeded the pool size; the conditioning event of the tester failed.
    #[error("poisson budget {budget} at coordinate {coordinate} exceeds cap {cap}")]
    CapExceeded {
        coordinate: usize,
        budget: u64,
        cap: u64,
    },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("coordinate {index} = {value} violates {tau}-balancedness")]
    Unbalanced { index: usize, value: f64, tau: f64 },

    #[error("exact TV enumeration supports d <= {max}, got d = {dim}; use tv_bounds")]
    EnumerationTooLarge { dim: usize, max: usize },

    #[error("subset code budget exhausted after {achieved} of {requested} sets")]
    CodeBudgetExhausted { achieved: usize, requested: usize },

    #[error("subset has {found} elements, expected {expected}")]
    SubsetSize { expected: usize, found: usize },

    #[error("subset element {element} out of range for d = {dim}")]
    SubsetElement { element: usize, dim: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("records do not share (d, epsilon, tau, eta)")]
    HeterogeneousRecords,

    #[error("sample audit failed: {0}")]
    Audit(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
