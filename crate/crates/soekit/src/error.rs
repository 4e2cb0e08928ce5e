//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("spectral model is inconsistent: {0}")]
    ModelInvariant(String),

    #[error("evaluator returned a non-finite value at ω = {omega:?}")]
    EvaluatorFailure { omega: num_complex::Complex64 },

    #[error("evaluation point within {distance:.3e} of a statistics-factor pole (margin {margin:.3e}); contour is misconfigured")]
    NearPole { distance: f64, margin: f64 },

    #[error("quadrature produced a non-finite weight at node {index}")]
    NonFiniteWeight { index: usize },

    #[error("refinement failed to reach target {target:.3e}; best achieved {achieved:.3e} after {rounds} rounds")]
    RefinementFailed {
        target: f64,
        achieved: f64,
        rounds: usize,
        best: Box<crate::soe::SoeRepresentation>,
    },

    #[error("oracle tolerance {requested:.3e} not met; error estimate {estimate:.3e}")]
    ToleranceNotMet { requested: f64, estimate: f64 },

    #[error("sample matrix rank {rank} is below the requested {requested} modes")]
    RankDeficient { rank: usize, requested: usize },

    #[error("no mode count up to {n_max} reached the target {target:.3e}; best error {best_error:.3e} with {best_n} modes")]
    ModeSearchExhausted {
        n_max: usize,
        target: f64,
        best_error: f64,
        best_n: usize,
        best: Box<crate::soe::SoeRepresentation>,
    },

    #[error("integrator produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("kernel SOE target {target:.3e} not met within {cap} nodes (best {best:.3e})")]
    KernelTargetNotMet { target: f64, cap: usize, best: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
