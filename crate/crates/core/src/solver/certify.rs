use crate::error::{Error, Result};
use crate::eval::{
    evaluate, evaluate_stationary_linear, termination_probability, EvalConfig, StateDistribution,
    ValueFunction, TERMINATION_THRESHOLD,
};
use crate::model::{ActionId, Model, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;

/// Slack granted in the passing direction of strict inequalities.
pub const STRICT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessivityReport<T> {
    pub passes: bool,
    /// `max_{s,a} Σ q [r + β u] - u(s)`; nonpositive when `u` is excessive.
    pub worst_violation: T,
    /// Worst `(state, action)` pair, present when the check fails.
    pub witness: Option<(StateId, ActionId)>,
    /// `u(s) - Σ q [r + β u]`, indexed `[state][action]`.
    pub slack: Vec<Vec<T>>,
}

impl<T: Scalar> ExcessivityReport<T> {
    pub fn slack_at(&self, state: StateId, action: ActionId) -> T {
        self.slack[state.0][action.0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityReport<T> {
    pub passes: bool,
    /// State of largest deficit, present when the check fails.
    pub witness: Option<StateId>,
    /// Largest deficit `u*(s) - I(f)(s)` over the checked states.
    pub deficit_at_witness: T,
    /// `∫ u* dp - ∫ I(f) dp` (for the additive check, the unweighted mean
    /// gap over all states).
    pub aggregate_gap: T,
}

/// Checks `u(s) ≥ Σ q(·|s,a) [r + β u]` for every pair, up to `tolerance`.
/// A passing `u` bounds the return of every plan from above.
pub fn check_excessive<T: Scalar>(
    model: &Model<T>,
    u: &ValueFunction<T>,
    beta: T,
    tolerance: T,
) -> Result<ExcessivityReport<T>, T> {
    if u.len() != model.num_states() {
        return Err(Error::InvalidParameter(format!(
            "value function has {} entries, model has {} states",
            u.len(),
            model.num_states()
        )));
    }
    if beta == T::one() {
        if let Some((s, &v)) = u.values.iter().enumerate().find(|(_, v)| **v < T::zero()) {
            return Err(Error::NegativeCertificate {
                state: StateId(s),
                value: v,
            });
        }
    }
    let mut worst = T::neg_infinity();
    let mut worst_at = None;
    let slack = model
        .states()
        .map(|s| {
            (0..model.num_actions(s))
                .map(|a| {
                    let gap = model.q_value(s, ActionId(a), &u.values, beta) - u.get(s);
                    if gap > worst {
                        worst = gap;
                        worst_at = Some((s, ActionId(a)));
                    }
                    -gap
                })
                .collect()
        })
        .collect();
    let passes = worst <= tolerance;
    Ok(ExcessivityReport {
        passes,
        worst_violation: worst,
        witness: if passes { None } else { worst_at },
        slack,
    })
}

fn deficits<T: Scalar>(ustar: &[T], value: &[T], states: impl Iterator<Item = StateId>) -> (T, Option<StateId>) {
    let mut worst = T::neg_infinity();
    let mut at = None;
    for s in states {
        let d = ustar[s.0] - value[s.0];
        if d > worst {
            worst = d;
            at = Some(s);
        }
    }
    (worst, at)
}

fn check_inputs<T: Scalar>(model: &Model<T>, ustar: &ValueFunction<T>, eps: T) -> Result<(), T> {
    if ustar.len() != model.num_states() {
        return Err(Error::InvalidParameter(
            "optimal value has the wrong number of states".into(),
        ));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} must be positive")));
    }
    Ok(())
}

/// Pointwise check: `I(f)(s) > u*(s) - ε` at every state charged by `p`.
pub fn check_p_eps_optimal<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    p: &StateDistribution<T>,
    eps: T,
    ustar: &ValueFunction<T>,
    cfg: &EvalConfig<T>,
) -> Result<OptimalityReport<T>, T> {
    check_inputs(model, ustar, eps)?;
    let value = evaluate(model, &f.clone().into(), cfg)?;
    let (worst, at) = deficits(&ustar.values, &value.values, p.support());
    let slack = T::lit(STRICT_SLACK);
    let passes = p
        .support()
        .all(|s| value.get(s) > ustar.get(s) - eps - slack);
    Ok(OptimalityReport {
        passes,
        witness: if passes { None } else { at },
        deficit_at_witness: worst,
        aggregate_gap: p.integrate(&ustar.values) - p.integrate(&value.values),
    })
}

/// Averaged check: `∫ I(f) dp > ∫ u* dp - ε`. On a finite model the best
/// plan's average equals the average of `u*`, so `v` is taken as `∫ u* dp`.
pub fn check_weak_p_eps_optimal<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    p: &StateDistribution<T>,
    eps: T,
    ustar: &ValueFunction<T>,
    cfg: &EvalConfig<T>,
) -> Result<OptimalityReport<T>, T> {
    check_inputs(model, ustar, eps)?;
    let value = evaluate(model, &f.clone().into(), cfg)?;
    let achieved = p.integrate(&value.values);
    let v = p.integrate(&ustar.values);
    let passes = achieved > v - eps - T::lit(STRICT_SLACK);
    let (worst, at) = deficits(&ustar.values, &value.values, p.support());
    Ok(OptimalityReport {
        passes,
        witness: if passes { None } else { at },
        deficit_at_witness: worst,
        aggregate_gap: v - achieved,
    })
}

/// Additive check for signed rewards: `F(x) - F_f(x) < ε` everywhere, where
/// `F` is the best value over terminating plans and `f` must terminate.
pub fn check_additive_eps_optimal<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    eps: T,
    ustar_terminating: &ValueFunction<T>,
) -> Result<OptimalityReport<T>, T> {
    check_inputs(model, ustar_terminating, eps)?;
    let term = termination_probability(model, f);
    if let Some((s, &p)) = term
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p >= T::lit(TERMINATION_THRESHOLD)))
    {
        return Err(Error::NotTerminating {
            state: StateId(s),
            probability: p,
        });
    }
    let value = evaluate_stationary_linear(model, f, T::one())?;
    let (worst, at) = deficits(&ustar_terminating.values, &value.values, model.states());
    let passes = worst < eps + T::lit(STRICT_SLACK);
    let n = T::from_usize(model.num_states()).unwrap_or_else(T::one);
    let mean_gap = model
        .states()
        .map(|s| ustar_terminating.get(s) - value.get(s))
        .sum::<T>()
        / n;
    Ok(OptimalityReport {
        passes,
        witness: if passes { None } else { at },
        deficit_at_witness: worst,
        aggregate_gap: mean_gap,
    })
}
