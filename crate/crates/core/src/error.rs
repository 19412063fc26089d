use thiserror::Error;

/// Errors raised by models, integrators, schedules and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate diffusion: sigma = {value} at step {step}")]
    DegenerateDiffusion { step: usize, value: f64 },

    #[error("schedule `{schedule}` returned non-finite alpha {value} at step {step}")]
    NonFiniteSchedule {
        schedule: String,
        step: usize,
        value: f64,
    },

    #[error("schedule `{0}` is only defined on a finite horizon")]
    FiniteHorizonOnly(String),

    #[error("path {path} overflowed at step {step} under schedule `{schedule}`")]
    Overflow {
        schedule: String,
        path: u64,
        step: usize,
    },

    #[error("all {paths} paths overflowed under schedule `{schedule}`; first overflow at step {first_step}")]
    AllPathsOverflowed {
        schedule: String,
        paths: usize,
        first_step: usize,
    },

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("initial condition is not affine in gamma (deviation {deviation:e})")]
    NonAffineInitialCondition { deviation: f64 },

    #[error("tangent vector collapsed to zero at step {step}")]
    TangentCollapsed { step: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
