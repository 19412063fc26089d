//! Linear response of stochastic differential equations by the path-kernel
//! method.
//!
//! A parameter perturbation is carried partly along the path by a damped
//! tangent `v` and partly by a likelihood-ratio weight on the transition
//! kernel; the schedule `α_n` decides the split at every step. The crate
//! provides the finite-horizon and ergodic estimators, the built-in models
//! (noisy Lorenz 96, Ornstein–Uhlenbeck, a drift-free Gaussian), and
//! independent oracles to check them against.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod integrator;
pub mod model;
pub mod models;
pub mod observables;
pub mod oracle;
pub mod registry;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod stats;

pub use error::{Error, Result};
pub use estimator::{
    estimate_ergodic, estimate_ergodic_replicated, estimate_finite_time, ErgodicConfig,
    ErgodicReport, FiniteTimeConfig, FiniteTimeReport, OverflowPolicy, SensitivityEstimate,
};
pub use integrator::{PathAccumulators, PathState};
pub use model::{Observable, ParamPoint, SdeModel, State, TangentVector};
pub use models::{Gauss, Lorenz96, OrnsteinUhlenbeck, ParamFlavor};
pub use observables::{Coordinate, CoordinateMean, SquaredCoordinate};
pub use rng::RngStream;
pub use scalar::Scalar;
pub use schedule::{Bel, Constant, HistoryView, PureKernel, Schedule, StateDependent};

pub type State64 = model::State<f64>;
pub type Tangent64 = model::TangentVector<f64>;
pub type Lorenz96F64 = models::Lorenz96<f64>;
pub type Lorenz96F32 = models::Lorenz96<f32>;
pub type OrnsteinUhlenbeck64 = models::OrnsteinUhlenbeck<f64>;
pub type OrnsteinUhlenbeck32 = models::OrnsteinUhlenbeck<f32>;
pub type Estimate64 = estimator::SensitivityEstimate<f64>;
pub type Estimate32 = estimator::SensitivityEstimate<f32>;
pub type FiniteTimeConfig64 = estimator::FiniteTimeConfig<f64>;
pub type ErgodicConfig64 = estimator::ErgodicConfig<f64>;
pub type FiniteTimeReport64 = estimator::FiniteTimeReport<f64>;
pub type ErgodicReport64 = estimator::ErgodicReport<f64>;
pub type ModelRegistry64 = registry::ModelRegistry<f64>;
