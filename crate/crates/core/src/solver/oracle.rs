use crate::error::{Error, Result};
use crate::eval::{is_terminating, stationary_value, ValueFunction};
use crate::model::{ActionId, Model, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;
use crate::solver::bellman_values;

/// Largest number of stationary policies the enumeration route visits.
pub const ORACLE_MAX_POLICIES: u128 = 1_000_000;

/// Sup-norm tolerance within which the two oracle routes must agree.
pub const ORACLE_AGREEMENT: f64 = 1e-7;

/// Optimal values computed two independent ways, returned only when the
/// routes agree within [`ORACLE_AGREEMENT`]:
///
/// * finite-horizon backward recursion, `horizon` applications of the
///   Bellman operator to zero;
/// * exhaustive enumeration of deterministic stationary policies, each
///   evaluated by a direct linear solve, maximized pointwise.
///
/// With `terminating_only` the enumeration keeps only plans absorbed with
/// probability one, and the recursion is replaced by `horizon` sweeps of
/// each kept plan's own evaluation operator (the unrestricted recursion
/// would also see non-terminating behaviour).
///
/// The returned value carries the enumeration result with the observed
/// discrepancy as its residual.
pub fn brute_force_optimal<T: Scalar>(
    model: &Model<T>,
    beta: T,
    horizon: usize,
    terminating_only: bool,
) -> Result<ValueFunction<T>, T> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("discount {beta} outside [0, 1]")));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let count = model.stationary_policy_count();
    if count > ORACLE_MAX_POLICIES {
        return Err(Error::TooLarge(format!(
            "{count} stationary policies exceed the enumeration limit of {ORACLE_MAX_POLICIES}"
        )));
    }

    let n = model.num_states();
    let mut enumeration: Option<Vec<T>> = None;
    let mut recursion: Option<Vec<T>> = None;
    let mut choice = vec![ActionId(0); n];
    loop {
        let f = StationaryPolicy::from_choices_unchecked(choice.clone());
        if !terminating_only || is_terminating(model, &f) {
            let v = stationary_value(model, &f, beta)?;
            merge_max(&mut enumeration, v);
            if terminating_only {
                merge_max(&mut recursion, policy_recursion(model, &f, beta, horizon));
            }
        }
        if !advance(model, &mut choice) {
            break;
        }
    }
    let enumeration = enumeration.ok_or_else(|| {
        Error::InvalidParameter("no terminating stationary policy exists".into())
    })?;
    let recursion = match recursion {
        Some(r) => r,
        None => {
            let mut u = vec![T::zero(); n];
            for _ in 0..horizon {
                u = bellman_values(model, &u, beta);
            }
            u
        }
    };

    let mut discrepancy = T::zero();
    let mut worst = 0;
    for s in 0..n {
        let d = (recursion[s] - enumeration[s]).abs();
        if !(d <= discrepancy) {
            discrepancy = d;
            worst = s;
        }
    }
    if !(discrepancy <= T::lit(ORACLE_AGREEMENT)) {
        return Err(Error::OracleMismatch {
            state: StateId(worst),
            recursion: recursion[worst],
            enumeration: enumeration[worst],
        });
    }
    Ok(ValueFunction {
        values: enumeration,
        beta,
        converged: true,
        residual: discrepancy,
    })
}

fn merge_max<T: Scalar>(acc: &mut Option<Vec<T>>, v: Vec<T>) {
    match acc {
        Some(best) => {
            for (b, x) in best.iter_mut().zip(v) {
                *b = b.max(x);
            }
        }
        None => *acc = Some(v),
    }
}

/// Odometer over action indices; false once every combination was visited.
fn advance<T: Scalar>(model: &Model<T>, choice: &mut [ActionId]) -> bool {
    for (s, a) in choice.iter_mut().enumerate() {
        if a.0 + 1 < model.num_actions(StateId(s)) {
            a.0 += 1;
            return true;
        }
        a.0 = 0;
    }
    false
}

fn policy_recursion<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    beta: T,
    horizon: usize,
) -> Vec<T> {
    let mut u = vec![T::zero(); model.num_states()];
    for _ in 0..horizon {
        u = model
            .states()
            .map(|s| model.q_value(s, f.action(s), &u, beta))
            .collect();
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, Regime};

    #[test]
    fn odometer_visits_every_policy_once() {
        let mut b = ModelBuilder::<f64>::new(Regime::Positive);
        let x = b.add_state("x");
        let y = b.add_state("y");
        for k in 0..3 {
            b.add_action(x, format!("a{k}"), [(y, 1.0, k as f64)]);
        }
        b.add_action(y, "a", [(y, 1.0, 0.0)]);
        b.add_action(y, "b", [(y, 1.0, 0.0)]);
        let m = b.build();
        let mut choice = vec![ActionId(0); 2];
        let mut seen = std::collections::HashSet::new();
        loop {
            assert!(seen.insert(choice.clone()));
            if !advance(&m, &mut choice) {
                break;
            }
        }
        assert_eq!(seen.len() as u128, m.stationary_policy_count());
    }

    #[test]
    fn short_horizon_disagrees_on_long_chains() {
        let mut b = ModelBuilder::<f64>::new(Regime::Positive);
        let x = b.add_state("x");
        let y = b.add_state("y");
        let t = b.add_state("t");
        b.add_action(x, "go", [(y, 1.0, 0.0)]);
        b.add_action(y, "pay", [(t, 1.0, 1.0)]);
        b.add_action(t, "stay", [(t, 1.0, 0.0)]);
        let m = b.build();
        assert!(matches!(
            brute_force_optimal(&m, 1.0, 1, false),
            Err(Error::OracleMismatch { state: StateId(0), .. })
        ));
        let v = brute_force_optimal(&m, 1.0, 2, false).unwrap();
        assert_eq!(v.values, vec![1.0, 1.0, 0.0]);
    }
}
