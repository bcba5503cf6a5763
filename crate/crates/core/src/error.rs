use thiserror::Error;

/// Errors surfaced by dataset construction, weighting, and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dataset has no event records; every estimator requires at least one event")]
    NoEvents,
    #[error(
        "degenerate weight: survival estimate is zero at event time {time} (record {id}); \
         the last observed time is an event, so its inverse-probability weight is infinite; \
         re-restrict at a smaller tau or exclude the record"
    )]
    DegenerateWeight { id: String, time: f64 },
    #[error("weighted design matrix is singular or near-singular (condition estimate {cond:.3e})")]
    SingularDesign { cond: f64 },
    #[error("too few events for {folds}-fold cross-validation ({n_events} events)")]
    TooFewEvents { folds: usize, n_events: usize },
    #[error("objective is not finite: {0}")]
    NonFiniteObjective(String),
    #[error("domain violation: {0}")]
    DomainError(String),
    #[error("censoring calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("every candidate fit failed or none converged")]
    AllFitsFailed,
}

pub type Result<T> = std::result::Result<T, Error>;
