use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {x} lies outside {what}")]
    Domain { x: f64, what: String },

    #[error("singular point at x = {x}: {reason}")]
    SingularPoint { x: f64, reason: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("root finder failed to converge on [{lo}, {hi}]")]
    RootFinding { lo: f64, hi: f64 },

    #[error("index {index} out of range for explicit sequence of length {len}")]
    Index { index: usize, len: usize },

    #[error("no good maps (gamma <= {threshold}) in the first {n} terms")]
    NoGoodMaps { threshold: f64, n: usize },

    #[error("requested depth {requested} exceeds the tabulated depth {available}")]
    Depth { requested: usize, available: usize },

    #[error("value {value} at n = {n} is not strictly positive")]
    NonPositiveValue { n: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tail is not normalized: r(1) = {0}")]
    NotNormalized(f64),

    #[error("horizon too short: {0}")]
    Horizon(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
