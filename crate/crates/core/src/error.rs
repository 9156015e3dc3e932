use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("rank levels must form a contiguous range 1..L; level {0} is missing")]
    NonContiguousLevels(u32),
    #[error("value at row {0} is NaN")]
    NanValue(usize),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("cdf support mismatch: {0} vs {1} points")]
    SupportMismatch(usize, usize),
    #[error("sample sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("n = {n} is not (2m+1)k for k = {k}, m = {m}")]
    NotQuantileShaped { n: usize, k: usize, m: usize },
    #[error("enumeration too large: {what} has {count} cases, limit is {limit}")]
    TooLarge {
        what: &'static str,
        count: u128,
        limit: u128,
    },
    #[error("calibration search exhausted: mean KS at upper bound {upper} is {mean_ks:.6}, target {target:.6}")]
    SearchExhausted {
        upper: usize,
        mean_ks: f64,
        target: f64,
    },
    #[error("population file: {0}")]
    PopulationFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
