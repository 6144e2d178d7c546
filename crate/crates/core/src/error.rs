//! Error type shared by all modules.
//!
//! Diagnostics carry `f64` copies of the offending values so the error type
//! stays non-generic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("atom location {location} outside [-{horizon}, 0]")]
    AtomOutOfRange { location: f64, horizon: f64 },

    #[error("atom locations must be strictly increasing (got {prev} then {next})")]
    AtomsNotSorted { prev: f64, next: f64 },

    #[error("density needs at least two samples, got {got}")]
    DensityTooShort { got: usize },

    #[error("delay horizon must be positive, got {horizon}")]
    NonPositiveHorizon { horizon: f64 },

    #[error(
        "grid is not delay-commensurate: delay r = {delay}, horizon T = {horizon}, N = {intervals} \
         intervals require r = m*(T/N) exactly for an integer m >= 1; nearest is m = {nearest} \
         with m*(T/N) = {snapped}; adjust delay, horizon, or N so the product is exact"
    )]
    NonCommensurateGrid {
        delay: f64,
        horizon: f64,
        intervals: usize,
        nearest: u64,
        snapped: f64,
    },

    #[error("trajectory must start at the history value: x(0) = {value} but history(0) = {expected}")]
    JunctionMismatch { value: f64, expected: f64 },

    #[error("node grid needs at least {min} intervals, got {got}")]
    GridTooCoarse { min: usize, got: usize },

    #[error("quadrature subsample count must be a positive even number, got {got}")]
    BadSubsamples { got: usize },

    #[error("invalid solver configuration: {0}")]
    BadSolveConfig(String),

    #[error("measures cannot be combined: {0}")]
    IncompatibleMeasures(String),

    #[error("invalid problem data: {0}")]
    BadProblem(String),
}

pub type CoreResult<T> = Result<T, CoreError>;
