//! Positive dynamic programming: finite Markov decision models with
//! nonnegative (or signed) rewards, plan evaluation, value iteration,
//! excessivity certificates and ε-optimal stationary plans.
//!
//! Everything numerical is generic over [`Scalar`]; the aliases below fix
//! the scalar to `f64`, with `F32*` variants for single precision.

// `!(x <= y)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod chain;
pub mod cli;
pub mod error;
pub mod eval;
pub mod instances;
pub mod model;
pub mod policy;
pub mod scalar;
pub mod solver;
pub mod textio;

pub use error::Error as GenericError;
pub use model::{ActionId, Regime, StateId};
pub use policy::{HistoryPolicy, MarkovPolicy, Policy, SemiMarkovPolicy, StationaryPolicy};
pub use scalar::Scalar;

pub type Error = error::Error<f64>;
pub type Result<X> = error::Result<X, f64>;
pub type Model = model::Model<f64>;
pub type ModelBuilder = model::ModelBuilder<f64>;
pub type Transition = model::Transition<f64>;
pub type ValidationReport = model::ValidationReport<f64>;
pub type ValueFunction = eval::ValueFunction<f64>;
pub type StateDistribution = eval::StateDistribution<f64>;
pub type EvalConfig = eval::EvalConfig<f64>;
pub type MonteCarloEstimate = eval::MonteCarloEstimate<f64>;
pub type ExcessivityReport = solver::ExcessivityReport<f64>;
pub type OptimalityReport = solver::OptimalityReport<f64>;
pub type ConstructionDiagnostics = solver::ConstructionDiagnostics<f64>;

pub type F32Model = model::Model<f32>;
pub type F32ModelBuilder = model::ModelBuilder<f32>;
pub type F32ValueFunction = eval::ValueFunction<f32>;
pub type F32EvalConfig = eval::EvalConfig<f32>;
