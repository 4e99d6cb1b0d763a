//! Bellman operators, value iteration and greedy extraction, plus the
//! certificate checks, the discounting construction of near-optimal
//! stationary plans and the brute-force oracle built on top of them.

mod certify;
mod construct;
mod oracle;

pub use certify::{
    check_additive_eps_optimal, check_excessive, check_p_eps_optimal, check_weak_p_eps_optimal,
    ExcessivityReport, OptimalityReport, STRICT_SLACK,
};
pub use construct::{construct_eps_optimal_stationary, ConstructionDiagnostics};
pub use oracle::{brute_force_optimal, ORACLE_AGREEMENT, ORACLE_MAX_POLICIES};

use crate::error::{Error, Result};
use crate::eval::{sup_distance, ValueFunction};
use crate::model::{ActionId, Model, Regime, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;

/// Value iteration aborts once any entry exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// `max_a Σ q(s'|s,a) [r(s,a,s') + β u(s')]` at every state.
pub(crate) fn bellman_values<T: Scalar>(model: &Model<T>, u: &[T], beta: T) -> Vec<T> {
    model
        .states()
        .map(|s| {
            (0..model.num_actions(s))
                .map(|a| model.q_value(s, ActionId(a), u, beta))
                .fold(T::neg_infinity(), T::max)
        })
        .collect()
}

/// The discounted operator applied once to `u`.
pub fn bellman_discounted<T: Scalar>(
    model: &Model<T>,
    u: &ValueFunction<T>,
    beta: T,
) -> ValueFunction<T> {
    ValueFunction::new(bellman_values(model, &u.values, beta), beta)
}

/// The undiscounted operator `K` applied once to `u`.
pub fn bellman_positive<T: Scalar>(model: &Model<T>, u: &ValueFunction<T>) -> ValueFunction<T> {
    bellman_discounted(model, u, T::one())
}

/// Successive iterates `u_{k+1} = U_β u_k` starting from `u_0 = 0`.
#[derive(Clone, Debug)]
pub struct ValueIteration<'a, T> {
    model: &'a Model<T>,
    beta: T,
    values: Vec<T>,
    iterations: usize,
}

impl<'a, T: Scalar> ValueIteration<'a, T> {
    pub fn new(model: &'a Model<T>, beta: T) -> Self {
        Self {
            model,
            beta,
            values: vec![T::zero(); model.num_states()],
            iterations: 0,
        }
    }

    /// Applies the operator once and returns the sup-norm increment.
    pub fn step(&mut self) -> T {
        let next = bellman_values(self.model, &self.values, self.beta);
        let delta = sup_distance(&next, &self.values);
        self.values = next;
        self.iterations += 1;
        delta
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Iterates the Bellman operator from zero until the sup-norm increment
/// drops below `tol`. Returns the last iterate and the number of sweeps.
pub fn value_iterate<T: Scalar>(
    model: &Model<T>,
    beta: T,
    tol: T,
    max_iter: usize,
) -> Result<(ValueFunction<T>, usize), T> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("discount {beta} outside [0, 1]")));
    }
    if !(tol > T::zero()) || max_iter == 0 {
        return Err(Error::InvalidParameter(
            "tolerance and iteration cap must be positive".into(),
        ));
    }
    if beta == T::one() && model.regime() != Regime::Positive {
        return Err(Error::RegimeMismatch {
            expected: "positive",
        });
    }
    let bound = T::lit(DIVERGENCE_BOUND);
    let mut vi = ValueIteration::new(model, beta);
    let mut residual = T::infinity();
    while vi.iterations() < max_iter {
        residual = vi.step();
        if let Some((s, &v)) = vi
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= bound))
        {
            return Err(Error::Divergent {
                state: StateId(s),
                value: v,
            });
        }
        if residual < tol {
            let n = vi.iterations();
            return Ok((
                ValueFunction {
                    values: vi.values,
                    beta,
                    converged: true,
                    residual,
                },
                n,
            ));
        }
    }
    Err(Error::NotConverged {
        partial: Box::new(ValueFunction {
            values: vi.values,
            beta,
            converged: false,
            residual,
        }),
        iterations: max_iter,
    })
}

/// Picks a maximizing action of the one-step lookahead at every state,
/// preferring the smallest index among ties.
pub fn greedy_policy<T: Scalar>(model: &Model<T>, u: &ValueFunction<T>, beta: T) -> StationaryPolicy {
    let choice = model
        .states()
        .map(|s| {
            let mut best = ActionId(0);
            let mut best_q = model.q_value(s, best, &u.values, beta);
            for a in 1..model.num_actions(s) {
                let q = model.q_value(s, ActionId(a), &u.values, beta);
                if q > best_q {
                    best = ActionId(a);
                    best_q = q;
                }
            }
            best
        })
        .collect();
    StationaryPolicy::from_choices_unchecked(choice)
}
