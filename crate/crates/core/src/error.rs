use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("DimensionError: {0}")]
    Dimension(String),

    #[error("IndexError: index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("NotPositiveDefinite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// `index` is the candidate row of Φ when the failure happened inside a
    /// placement run.
    #[error("DegenerateSchur: Schur complement {h:e} <= {threshold:e} (candidate {index:?})")]
    DegenerateSchur {
        index: Option<usize>,
        h: f64,
        threshold: f64,
    },

    #[error("BudgetError: budget {budget} is not in 1..={n}")]
    Budget { budget: usize, n: usize },

    #[error("TooLarge: {subsets} subsets exceed the enumeration limit of {limit}")]
    TooLarge { subsets: u128, limit: u128 },

    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
