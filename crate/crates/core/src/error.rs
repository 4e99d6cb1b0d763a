use thiserror::Error;

use crate::eval::ValueFunction;
use crate::model::{ActionId, StateId, ValidationReport};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;
use crate::solver::ConstructionDiagnostics;

/// Failures of the numerical routines. Payloads carry enough of the
/// computation (partial results, witnesses) to report what went wrong.
#[derive(Debug, Error)]
pub enum Error<T: Scalar = f64> {
    #[error("model is invalid: {0}")]
    InvalidModel(ValidationReport<T>),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("policy chose action {action:?} which does not exist at state {state:?} (stage {stage})")]
    InvalidAction {
        state: StateId,
        action: ActionId,
        stage: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a {expected} model")]
    RegimeMismatch { expected: &'static str },

    #[error("partial sum {value} at state {state:?} exceeded the divergence bound")]
    Divergent { state: StateId, value: T },

    #[error("not converged after {iterations} iterations (residual {})", partial.residual)]
    NotConverged {
        partial: Box<ValueFunction<T>>,
        iterations: usize,
    },

    #[error("linear system is singular: state {state:?} never reaches an absorbing state")]
    SingularSystem { state: StateId },

    #[error("certificate is negative at state {state:?} ({value})")]
    NegativeCertificate { state: StateId, value: T },

    #[error("policy is not terminating: state {state:?} is absorbed with probability {probability}")]
    NotTerminating { state: StateId, probability: T },

    #[error("no discount in the schedule produced a good enough plan (best ratio {})", best.1.achieved_ratio)]
    ScheduleExhausted {
        best: Box<(StationaryPolicy, ConstructionDiagnostics<T>)>,
    },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("explicit counterexample deeper than 20 primary states requested ({depth})")]
    TooDeep { depth: usize },

    #[error("oracle routes disagree at state {state:?}: recursion {recursion}, enumeration {enumeration}")]
    OracleMismatch {
        state: StateId,
        recursion: T,
        enumeration: T,
    },
}

pub type Result<X, T = f64> = std::result::Result<X, Error<T>>;
