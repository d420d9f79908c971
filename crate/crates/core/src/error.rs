use thiserror::Error;

/// Errors produced by the spectral solvers and their supporting machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system is not Hurwitz ({verdict}); spectrum is undefined")]
    NotHurwitz { verdict: &'static str },

    #[error("noise covariance is not positive semidefinite: {0}")]
    IndefiniteCovariance(String),

    #[error("singular linear system encountered ({0})")]
    Singular(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:.3e} > tolerance {tolerance:.3e}")]
    QuadratureDiverged { achieved: f64, tolerance: f64 },

    #[error("fixed-point iteration failed to converge: {0}")]
    FixedPointDiverged(String),

    #[error("simulation blew up (non-finite state) at step {step}")]
    SimulationBlowUp { step: usize },

    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),

    #[error("coherence undefined: {0}")]
    UndefinedCoherence(String),

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("unknown parameter '{param}' for model '{model}'")]
    UnknownParameter { model: String, param: String },
}

pub type Result<T> = std::result::Result<T, Error>;
