use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at coordinate {0}")]
    NonFinite(usize),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value {value} at coordinate {index} lies outside [{lo}, {hi}]")]
    OutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("symbol {0} has zero count in the model histogram")]
    ZeroCountSymbol(usize),

    #[error("histogram rank out of range")]
    RankOutOfRange,

    #[error("histogram counts sum to {sum}, expected {d}")]
    HistogramSum { sum: u64, d: u64 },

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("truncated input: {0}")]
    Truncated(&'static str),

    #[error("aggregated vector is zero; power iteration cannot continue")]
    ZeroAggregate,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
