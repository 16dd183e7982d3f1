use thiserror::Error;

/// Errors raised by the model, integrator, ingestion and fitting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite state at t = {t}: {state:?}")]
    NonFiniteState { t: f64, state: Vec<f64> },

    #[error("non-finite derivative at t = {t} (state {state:?})")]
    NonFiniteDerivative { t: f64, state: Vec<f64> },

    #[error("population must be positive, got {0}")]
    NonPositivePopulation(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("country {requested:?} not found; available: {available}")]
    UnknownCountry { requested: String, available: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("simulation failed for parameters {params:?}: {source}")]
    Simulation {
        params: Vec<(String, f64)>,
        #[source]
        source: Box<Error>,
    },

    #[error("cost is not finite at the initial point ({0})")]
    NonFiniteInitialCost(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
