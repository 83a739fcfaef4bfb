use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no records")]
    NoRecords,

    #[error("row {row}: malformed timestamp {value:?}")]
    MalformedTimestamp { row: usize, value: String },

    #[error("row {row}: malformed date {value:?}")]
    MalformedDate { row: usize, value: String },

    /// `row` counts records from 1, matching data rows of `images.csv`.
    #[error("row {row}: record has no predicted label")]
    MissingPrediction { row: usize },

    #[error("invalid species label {0:?}")]
    InvalidLabel(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("no misclassification row for label {0:?}")]
    MissingRow(String),

    #[error("theta has length {got}, expected {expected}")]
    ThetaLength { expected: usize, got: usize },

    #[error("latent state space too large: {species} species (maximum {max})")]
    StateSpaceTooLarge { species: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("species index {index} out of range for {species} species")]
    IndexOutOfRange { index: usize, species: usize },

    #[error("conditioning on null event")]
    NullConditioningEvent,

    #[error("detection history has no observed cells")]
    EmptyHistory,

    #[error(
        "no start converged (best nll {best_nll}, gradient inf-norm {best_grad_norm}, {iterations} iterations)"
    )]
    NoConvergence {
        best_nll: f64,
        best_grad_norm: f64,
        iterations: usize,
    },

    #[error("variance matrix unavailable")]
    VcovUnavailable,

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. })
    }
}
