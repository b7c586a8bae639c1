use thiserror::Error;

/// Errors raised by the model, simulator, spectral solver and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("velocity has zero magnitude")]
    ZeroVelocity,

    #[error("non-finite vector component")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adaptive quadrature did not converge (estimated error {estimate:e})")]
    QuadratureFailure { estimate: f64 },

    #[error("closed form not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("mode ODE step-halving check failed at minimum step {min_step:e} (change {change:e})")]
    StepSizeFailure { min_step: f64, change: f64 },

    #[error("spectral grid too coarse: {fraction:.3e} of spectral mass beyond 0.8 lambda_max")]
    GridTooCoarse { fraction: f64 },

    #[error("time {0} is not one of the ensemble sample times")]
    TimeNotSampled(f64),

    #[error("histogram too sparse: {0}")]
    SparseHistogram(String),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
