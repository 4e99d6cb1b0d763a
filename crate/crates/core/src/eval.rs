//! Expected returns of plans: exact forward propagation of the stage
//! occupancy, a direct linear solve for stationary plans, seeded Monte Carlo
//! rollouts and absorption probabilities.

use std::ops::Index;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::Chain;
use crate::error::{Error, Result};
use crate::model::{absorbing_states, ActionId, Model, StateId};
use crate::policy::{Policy, StationaryPolicy};
use crate::scalar::Scalar;

/// Minimum absorption probability for a stationary plan to count as
/// terminating.
pub const TERMINATION_THRESHOLD: f64 = 1.0 - 1e-9;

/// Largest number of distinct histories tracked when evaluating a
/// history-dependent plan exactly.
pub const MAX_HISTORY_PATHS: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction<T> {
    pub values: Vec<T>,
    pub beta: T,
    pub converged: bool,
    pub residual: T,
}

impl<T: Scalar> ValueFunction<T> {
    pub fn new(values: Vec<T>, beta: T) -> Self {
        Self {
            values,
            beta,
            converged: true,
            residual: T::zero(),
        }
    }

    pub fn zeros(n: usize, beta: T) -> Self {
        Self::new(vec![T::zero(); n], beta)
    }

    pub fn constant(n: usize, value: T, beta: T) -> Self {
        Self::new(vec![value; n], beta)
    }

    pub fn get(&self, state: StateId) -> T {
        self.values[state.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sup-norm distance to another value function.
    pub fn distance(&self, other: &Self) -> T {
        sup_distance(&self.values, &other.values)
    }
}

impl<T> Index<StateId> for ValueFunction<T> {
    type Output = T;

    fn index(&self, state: StateId) -> &T {
        &self.values[state.0]
    }
}

pub(crate) fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs())
        .fold(T::zero(), T::max)
}

/// Finite-support probability measure over states.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDistribution<T> {
    mass: Vec<(StateId, T)>,
}

impl<T: Scalar> StateDistribution<T> {
    /// Masses must lie in `(0, 1]`, name distinct valid states, and sum to
    /// one within the row tolerance.
    pub fn new(model: &Model<T>, mut mass: Vec<(StateId, T)>) -> Result<Self, T> {
        mass.sort_by_key(|(s, _)| *s);
        let mut total = T::zero();
        for (i, &(s, m)) in mass.iter().enumerate() {
            if s.0 >= model.num_states() {
                return Err(Error::InvalidParameter(format!("state {} out of range", s.0)));
            }
            if i > 0 && mass[i - 1].0 == s {
                return Err(Error::InvalidParameter(format!(
                    "state {} listed twice",
                    model.label(s)
                )));
            }
            if !(m > T::zero() && m <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "mass {m} at {} outside (0, 1]",
                    model.label(s)
                )));
            }
            total += m;
        }
        if !((total - T::one()).abs() <= T::lit(T::ROW_TOLERANCE)) {
            return Err(Error::InvalidParameter(format!("masses sum to {total}")));
        }
        Ok(Self { mass })
    }

    pub fn point(state: StateId) -> Self {
        Self {
            mass: vec![(state, T::one())],
        }
    }

    pub fn uniform(model: &Model<T>, states: &[StateId]) -> Result<Self, T> {
        let w = T::one() / T::from_usize(states.len()).unwrap_or_else(T::one);
        Self::new(model, states.iter().map(|&s| (s, w)).collect())
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.mass.iter().map(|(s, _)| *s)
    }

    pub fn entries(&self) -> &[(StateId, T)] {
        &self.mass
    }

    /// `∫ v dp`.
    pub fn integrate(&self, values: &[T]) -> T {
        self.mass.iter().map(|&(s, m)| m * values[s.0]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub rollouts: usize,
    /// Rollouts still collecting rewards when the horizon cut them off.
    pub truncated: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig<T> {
    pub beta: T,
    pub tol: T,
    pub max_stages: usize,
    pub divergence_bound: T,
}

impl<T: Scalar> Default for EvalConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::one(),
            tol: T::lit(1e-10),
            max_stages: 100_000,
            divergence_bound: T::lit(1e12),
        }
    }
}

impl<T: Scalar> EvalConfig<T> {
    pub fn with_beta(beta: T) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), T> {
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "discount {} outside [0, 1]",
                self.beta
            )));
        }
        if !(self.tol > T::zero()) || self.max_stages == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and stage cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

struct Particle {
    history: Vec<(StateId, ActionId)>,
    state: StateId,
}

/// States from which `policy` can collect nothing more. For stationary plans
/// only the chosen actions count; otherwise any action could be chosen later.
fn dead_under<T: Scalar>(model: &Model<T>, policy: &Policy) -> Vec<bool> {
    let Policy::Stationary(f) = policy else {
        return model.dead_states();
    };
    let chain = Chain::new(model, f);
    chain.can_reach(&chain.pays).into_iter().map(|r| !r).collect()
}

/// Forward propagation of the probability of being in each state (or, for
/// history plans, on each path) at the current stage, for one start state.
/// Mass that enters a dead state is dropped: nothing more can be earned.
struct Propagator<'a, T> {
    model: &'a Model<T>,
    policy: &'a Policy,
    dead: &'a [bool],
    initial: StateId,
    stage: usize,
    current: Vec<(usize, T)>,
    scratch: Vec<T>,
    touched: Vec<usize>,
    paths: Vec<(Particle, T)>,
}

impl<'a, T: Scalar> Propagator<'a, T> {
    fn new(model: &'a Model<T>, policy: &'a Policy, dead: &'a [bool]) -> Self {
        Self {
            model,
            policy,
            dead,
            initial: StateId(0),
            stage: 1,
            current: Vec::new(),
            scratch: vec![T::zero(); model.num_states()],
            touched: Vec::new(),
            paths: Vec::new(),
        }
    }

    fn reset(&mut self, start: StateId) {
        self.initial = start;
        self.stage = 1;
        self.current.clear();
        self.paths.clear();
        if self.dead[start.0] {
            return;
        }
        if self.policy.needs_history() {
            self.paths.push((
                Particle {
                    history: Vec::new(),
                    state: start,
                },
                T::one(),
            ));
        } else {
            self.current.push((start.0, T::one()));
        }
    }

    fn live_mass(&self) -> T {
        if self.policy.needs_history() {
            self.paths.iter().map(|(_, m)| *m).sum()
        } else {
            self.current.iter().map(|(_, m)| *m).sum()
        }
    }

    fn is_finished(&self) -> bool {
        self.current.is_empty() && self.paths.is_empty()
    }

    /// Expected reward collected at the current stage, then advances.
    fn step(&mut self) -> Result<T, T> {
        let reward = if self.policy.needs_history() {
            self.step_paths()?
        } else {
            self.step_states()?
        };
        self.stage += 1;
        Ok(reward)
    }

    fn step_states(&mut self) -> Result<T, T> {
        let mut reward = T::zero();
        for &(s, m) in &self.current {
            let state = StateId(s);
            let a = self
                .policy
                .select_action(self.model, self.initial, self.stage, &[], state)?;
            for t in self.model.row(state, a) {
                let flow = m * t.probability;
                reward += flow * t.reward;
                let j = t.target.0;
                if self.dead[j] {
                    continue;
                }
                if self.scratch[j] == T::zero() {
                    self.touched.push(j);
                }
                self.scratch[j] += flow;
            }
        }
        self.current.clear();
        self.touched.sort_unstable();
        for &j in &self.touched {
            let m = std::mem::replace(&mut self.scratch[j], T::zero());
            if m > T::zero() {
                self.current.push((j, m));
            }
        }
        self.touched.clear();
        Ok(reward)
    }

    fn step_paths(&mut self) -> Result<T, T> {
        let mut reward = T::zero();
        let mut next = Vec::new();
        for (p, m) in self.paths.drain(..) {
            let a = self.policy.select_action(
                self.model,
                self.initial,
                self.stage,
                &p.history,
                p.state,
            )?;
            for t in self.model.row(p.state, a) {
                let flow = m * t.probability;
                reward += flow * t.reward;
                if self.dead[t.target.0] {
                    continue;
                }
                let mut history = p.history.clone();
                history.push((p.state, a));
                next.push((
                    Particle {
                        history,
                        state: t.target,
                    },
                    flow,
                ));
            }
            if next.len() > MAX_HISTORY_PATHS {
                return Err(Error::TooLarge(format!(
                    "more than {MAX_HISTORY_PATHS} histories at stage {}",
                    self.stage
                )));
            }
        }
        self.paths = next;
        Ok(reward)
    }
}

/// Expected reward collected at stage `n` (1-based) from each start state.
pub fn stage_return<T: Scalar>(model: &Model<T>, policy: &Policy, n: usize) -> Result<Vec<T>, T> {
    if n == 0 {
        return Err(Error::InvalidParameter("stages are counted from 1".into()));
    }
    let dead = dead_under(model, policy);
    let mut prop = Propagator::new(model, policy, &dead);
    let mut out = vec![T::zero(); model.num_states()];
    for s in model.states() {
        prop.reset(s);
        for k in 1..=n {
            if prop.is_finished() {
                break;
            }
            let r = prop.step()?;
            if k == n {
                out[s.0] = r;
            }
        }
    }
    Ok(out)
}

/// Discounted return over the first `horizon` stages, exactly.
pub fn evaluate_finite_horizon<T: Scalar>(
    model: &Model<T>,
    policy: &Policy,
    beta: T,
    horizon: usize,
) -> Result<Vec<T>, T> {
    let dead = dead_under(model, policy);
    let mut prop = Propagator::new(model, policy, &dead);
    let mut out = vec![T::zero(); model.num_states()];
    for s in model.states() {
        prop.reset(s);
        let mut discount = T::one();
        let mut total = T::zero();
        for _ in 0..horizon {
            if prop.is_finished() {
                break;
            }
            total += discount * prop.step()?;
            discount *= beta;
        }
        out[s.0] = total;
    }
    Ok(out)
}

/// `Σ_n β^{n-1} r_n(π)(s)` for every start state, accumulated stage by stage.
///
/// A start state stops accumulating once no probability mass can earn
/// anything more, or once both the last increment and a bound on the next
/// one fall below `cfg.tol` (for `β < 1` the bound covers the whole tail).
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    policy: &Policy,
    cfg: &EvalConfig<T>,
) -> Result<ValueFunction<T>, T> {
    cfg.check()?;
    let beta = cfg.beta;
    let undiscounted = beta == T::one();
    let rmax = model.max_abs_reward();
    let dead = dead_under(model, policy);
    let mut prop = Propagator::new(model, policy, &dead);
    let mut values = vec![T::zero(); model.num_states()];
    let mut residual = T::zero();
    let mut converged = true;

    for s in model.states() {
        prop.reset(s);
        let mut discount = T::one();
        let mut total = T::zero();
        let mut last = T::zero();
        let mut done = prop.is_finished();
        let mut stage = 0;
        while !done && stage < cfg.max_stages {
            stage += 1;
            let increment = discount * prop.step()?;
            debug_assert!(
                !(undiscounted && model.regime() == crate::model::Regime::Positive)
                    || increment >= T::zero()
            );
            total += increment;
            last = increment.abs();
            discount *= beta;
            if !(total.abs() <= cfg.divergence_bound) {
                return Err(Error::Divergent {
                    state: s,
                    value: total,
                });
            }
            let live = prop.live_mass();
            done = if prop.is_finished() || live == T::zero() {
                true
            } else if undiscounted {
                last < cfg.tol && live * rmax < cfg.tol
            } else {
                last < cfg.tol && discount * live * rmax / (T::one() - beta) < cfg.tol
            };
        }
        if !done {
            converged = false;
        }
        residual = residual.max(last);
        values[s.0] = total;
    }

    let vf = ValueFunction {
        values,
        beta,
        converged,
        residual,
    };
    if converged {
        Ok(vf)
    } else {
        Err(Error::NotConverged {
            partial: Box::new(vf),
            iterations: cfg.max_stages,
        })
    }
}

/// Solves `v = r_f + β P_f v` directly. At `β = 1` every state must be
/// absorbed with probability one under `f`.
pub fn evaluate_stationary_linear<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    beta: T,
) -> Result<ValueFunction<T>, T> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("discount {beta} outside [0, 1]")));
    }
    let chain = Chain::new(model, f);
    if beta == T::one() {
        let term = termination_probability(model, f);
        if let Some((s, _)) = term
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p >= T::lit(TERMINATION_THRESHOLD)))
        {
            return Err(Error::SingularSystem { state: StateId(s) });
        }
    }
    let fixed: Vec<Option<T>> = model
        .states()
        .map(|s| model.is_absorbing(s).then(T::zero))
        .collect();
    let values = chain
        .solve(&chain.reward, beta, &fixed)
        .map_err(|state| Error::SingularSystem { state })?;
    let residual = bellman_residual(&chain, &values, beta);
    Ok(ValueFunction {
        values,
        beta,
        converged: true,
        residual,
    })
}

/// Value of a stationary plan as the minimal solution of its evaluation
/// equations: states that cannot reach a paying transition under `f` are
/// worth zero, and at `β = 1` every other state must drain into them.
pub(crate) fn stationary_value<T: Scalar>(
    model: &Model<T>,
    f: &StationaryPolicy,
    beta: T,
) -> Result<Vec<T>, T> {
    let chain = Chain::new(model, f);
    let earning = chain.can_reach(&chain.pays);
    let fixed: Vec<Option<T>> = earning.iter().map(|&e| (!e).then(T::zero)).collect();
    if beta == T::one() {
        let silent: Vec<bool> = earning.iter().map(|e| !e).collect();
        let drains = chain.can_reach(&silent);
        if let Some(s) = (0..chain.len()).find(|&s| !drains[s]) {
            return Err(match model.regime() {
                crate::model::Regime::Positive => Error::Divergent {
                    state: StateId(s),
                    value: T::infinity(),
                },
                crate::model::Regime::Signed => Error::SingularSystem { state: StateId(s) },
            });
        }
    }
    chain
        .solve(&chain.reward, beta, &fixed)
        .map_err(|state| Error::SingularSystem { state })
}

fn bellman_residual<T: Scalar>(chain: &Chain<T>, v: &[T], beta: T) -> T {
    (0..chain.len())
        .map(|s| {
            let next: T = chain.succ[s].iter().map(|&(t, p)| p * v[t]).sum();
            (chain.reward[s] + beta * next - v[s]).abs()
        })
        .fold(T::zero(), T::max)
}

/// Probability of eventually entering an absorbing state under `f`: the
/// minimal nonnegative solution of the absorption equations.
pub fn termination_probability<T: Scalar>(model: &Model<T>, f: &StationaryPolicy) -> Vec<T> {
    let chain = Chain::new(model, f);
    let n = chain.len();
    let mut absorbing = vec![false; n];
    for s in absorbing_states(model) {
        absorbing[s.0] = true;
    }
    let reach = chain.can_reach(&absorbing);
    let fixed: Vec<Option<T>> = (0..n)
        .map(|s| {
            if absorbing[s] {
                Some(T::one())
            } else if !reach[s] {
                Some(T::zero())
            } else {
                None
            }
        })
        .collect();
    let rhs = vec![T::zero(); n];
    match chain.solve(&rhs, T::one(), &fixed) {
        Ok(x) => x.into_iter().map(|p| p.max(T::zero()).min(T::one())).collect(),
        // Nearly closed components; fall back to monotone iteration from below.
        Err(_) => {
            let mut x: Vec<T> = fixed.iter().map(|v| v.unwrap_or_else(T::zero)).collect();
            for _ in 0..1_000_000 {
                let next: Vec<T> = (0..n)
                    .map(|s| match fixed[s] {
                        Some(v) => v,
                        None => chain.succ[s].iter().map(|&(t, p)| p * x[t]).sum(),
                    })
                    .collect();
                let delta = sup_distance(&next, &x);
                x = next;
                if delta < T::epsilon() {
                    break;
                }
            }
            x
        }
    }
}

pub fn is_terminating<T: Scalar>(model: &Model<T>, f: &StationaryPolicy) -> bool {
    termination_probability(model, f)
        .iter()
        .all(|&p| p >= T::lit(TERMINATION_THRESHOLD))
}

/// Seeded Monte Carlo estimate of the discounted return from `start`.
/// Rollout `i` draws from ChaCha stream `i` of `seed`, so the estimate does
/// not depend on the order rollouts are computed in.
pub fn simulate<T: Scalar>(
    model: &Model<T>,
    policy: &Policy,
    start: StateId,
    beta: T,
    horizon: usize,
    seed: u64,
    rollouts: usize,
) -> Result<MonteCarloEstimate<T>, T> {
    if rollouts == 0 || horizon == 0 {
        return Err(Error::InvalidParameter(
            "rollouts and horizon must be positive".into(),
        ));
    }
    let dead = dead_under(model, policy);
    let mut history = Vec::new();
    let mut mean = T::zero();
    let mut m2 = T::zero();
    let mut truncated = 0;
    for i in 0..rollouts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        history.clear();
        let mut state = start;
        let mut total = T::zero();
        let mut discount = T::one();
        let mut stage = 1;
        while stage <= horizon && !dead[state.0] {
            let a = policy.select_action(model, start, stage, &history, state)?;
            let row = model.row(state, a);
            let u = T::lit(rng.random::<f64>());
            let mut acc = T::zero();
            let mut pick = &row[row.len() - 1];
            for t in row {
                acc += t.probability;
                if u < acc {
                    pick = t;
                    break;
                }
            }
            total += discount * pick.reward;
            discount *= beta;
            if policy.needs_history() {
                history.push((state, a));
            }
            state = pick.target;
            stage += 1;
        }
        if stage > horizon && !dead[state.0] {
            truncated += 1;
        }
        // Welford
        let k = T::from_usize(i + 1).unwrap_or_else(T::one);
        let delta = total - mean;
        mean += delta / k;
        m2 += delta * (total - mean);
    }
    let n = T::from_usize(rollouts).unwrap_or_else(T::one);
    let stderr = if rollouts > 1 {
        (m2 / (n - T::one())).max(T::zero()).sqrt() / n.sqrt()
    } else {
        T::zero()
    };
    Ok(MonteCarloEstimate {
        mean,
        stderr,
        rollouts,
        truncated,
    })
}
