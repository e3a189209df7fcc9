//! Request-free nominal state `f(e)` learned from weather features.

mod features;
mod krr;
mod search;

pub use features::{build_features, weather_features, FeatureSpec};
pub use krr::{KernelHyper, NominalModel};
pub use search::{select_hyperparameters, subsample, SearchGrid, SearchResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NominalError {
    #[error("series of length {len} is shorter than the {lags} lags")]
    TooShort { len: usize, lags: usize },
    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel system is not positive definite; increase the ridge or remove duplicate inputs")]
    Factorization,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite feature or target")]
    NonFinite,
    #[error("training trace contains requests")]
    NotRequestFree,
}
