use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig};
use crate::model::{Model, Regime, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;
use crate::solver::{greedy_policy, value_iterate};

const INNER_TOL: f64 = 1e-10;
const INNER_MAX_ITER: usize = 5_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionDiagnostics<T> {
    pub beta_used: T,
    pub schedule_steps: usize,
    /// `min I(f)(s) / u*(s)` over the checked states with `u*(s) > 0`.
    pub achieved_ratio: T,
    pub succeeded: bool,
}

/// Seeks a stationary plan earning at least `(1 - eps) u*(s)` without
/// discounting, by solving the problem discounted at `β_k = 1 - 2^{-k}` for
/// `k = 1, 2, …, max_schedule` and testing each greedy plan.
///
/// Only states in `p_support` are checked (all states when `None`); states
/// with `u*(s) = 0` are ignored.
pub fn construct_eps_optimal_stationary<T: Scalar>(
    model: &Model<T>,
    eps: T,
    p_support: Option<&[StateId]>,
    max_schedule: usize,
) -> Result<(StationaryPolicy, ConstructionDiagnostics<T>), T> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} outside (0, 1)")));
    }
    if max_schedule == 0 {
        return Err(Error::InvalidParameter("empty discount schedule".into()));
    }
    if model.regime() != Regime::Positive {
        return Err(Error::RegimeMismatch {
            expected: "positive",
        });
    }
    let tol = T::lit(INNER_TOL);
    let (ustar, _) = value_iterate(model, T::one(), tol, INNER_MAX_ITER)?;
    let checked: Vec<StateId> = match p_support {
        Some(states) => states.to_vec(),
        None => model.states().collect(),
    };
    let checked: Vec<StateId> = checked
        .into_iter()
        .filter(|&s| ustar.get(s) > T::zero())
        .collect();
    let target = T::one() - eps;
    let cfg = EvalConfig::default();

    let mut best: Option<(StationaryPolicy, ConstructionDiagnostics<T>)> = None;
    let half = T::lit(0.5);
    let mut gap = T::one();
    for k in 1..=max_schedule {
        gap *= half;
        let beta = T::one() - gap;
        let (discounted, _) = value_iterate(model, beta, tol, INNER_MAX_ITER)?;
        let f = greedy_policy(model, &discounted, beta);
        let value = evaluate(model, &f.clone().into(), &cfg)?;
        let ratio = checked
            .iter()
            .map(|&s| value.get(s) / ustar.get(s))
            .fold(T::one(), T::min);
        let ok = checked
            .iter()
            .all(|&s| value.get(s) >= target * ustar.get(s));
        let diagnostics = ConstructionDiagnostics {
            beta_used: beta,
            schedule_steps: k,
            achieved_ratio: ratio,
            succeeded: ok,
        };
        if ok {
            return Ok((f, diagnostics));
        }
        if best.as_ref().is_none_or(|(_, d)| ratio > d.achieved_ratio) {
            best = Some((f, diagnostics));
        }
    }
    Err(Error::ScheduleExhausted {
        best: Box::new(best.expect("schedule has at least one step")),
    })
}
