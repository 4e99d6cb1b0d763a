//! Builders for the canonical counterexample systems and for seeded random
//! models used by the property suites.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ActionId, Model, ModelBuilder, Regime, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;

/// Largest depth accepted for the explicit (non-lumped) counterexample.
pub const MAX_EXPLICIT_DEPTH: usize = 20;

/// Truncation of the primary/secondary-chain counterexample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlackwellParams {
    pub depth: usize,
    /// Replace each secondary chain by a single transition paying its total.
    pub lumped: bool,
}

impl BlackwellParams {
    pub fn explicit(depth: usize) -> Self {
        Self {
            depth,
            lumped: false,
        }
    }

    pub fn lumped(depth: usize) -> Self {
        Self {
            depth,
            lumped: true,
        }
    }

    /// `p(n)`, `1 ≤ n ≤ depth`.
    pub fn primary(&self, n: usize) -> StateId {
        debug_assert!((1..=self.depth).contains(&n));
        StateId(n - 1)
    }

    pub fn terminal(&self) -> StateId {
        StateId(self.depth)
    }

    /// `s(m)`, `1 ≤ m < 2^depth`; explicit form only.
    pub fn secondary(&self, m: usize) -> StateId {
        debug_assert!(!self.lumped && m >= 1);
        StateId(self.depth + m)
    }

    pub fn primaries(&self) -> Vec<StateId> {
        (1..=self.depth).map(|n| self.primary(n)).collect()
    }
}

pub const CONTINUE: ActionId = ActionId(0);
pub const JUMP: ActionId = ActionId(1);

/// Primary states `p(1..=N)`, the terminal state `t`, and (explicit form)
/// secondary states `s(1..2^N)`, in that index order.
///
/// From `p(n)`, `continue` moves to `p(n+1)` or `t` with probability one
/// half each (to `t` surely from `p(N)`), paying nothing; `jump` moves to
/// `s(2^n - 1)`, from where each step down the chain pays one dollar until
/// `t`. The lumped form sends `jump` straight to `t` paying `2^n - 1`.
pub fn blackwell_counterexample<T: Scalar>(params: BlackwellParams) -> Result<Model<T>, T> {
    let depth = params.depth;
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if !params.lumped && depth > MAX_EXPLICIT_DEPTH {
        return Err(Error::TooDeep { depth });
    }
    let secondary = if params.lumped { 0 } else { (1usize << depth) - 1 };
    let mut b = ModelBuilder::with_capacity(Regime::Positive, depth + 1 + secondary);
    for n in 1..=depth {
        b.add_state(format!("p({n})"));
    }
    let t = b.add_state("t");
    for m in 1..=secondary {
        b.add_state(format!("s({m})"));
    }
    let half = T::lit(0.5);
    for n in 1..=depth {
        let p = params.primary(n);
        if n < depth {
            b.add_action(
                p,
                "continue",
                [(params.primary(n + 1), half, T::zero()), (t, half, T::zero())],
            );
        } else {
            b.add_action(p, "continue", [(t, T::one(), T::zero())]);
        }
        let head = (1usize << n) - 1;
        if params.lumped {
            let total = T::lit(2f64.powi(n as i32) - 1.0);
            b.add_action(p, "jump", [(t, T::one(), total)]);
        } else {
            b.add_action(p, "jump", [(params.secondary(head), T::one(), T::zero())]);
        }
    }
    b.add_action(t, "stay", [(t, T::one(), T::zero())]);
    for m in 1..=secondary {
        let next = if m == 1 { t } else { params.secondary(m - 1) };
        b.add_action(params.secondary(m), "step", [(next, T::one(), T::one())]);
    }
    b.build_validated()
}

/// Stationary plan continuing at `p(n)` for `n < n0` and jumping at every
/// `p(n)` with `n ≥ n0`. With `n0 > depth` it never jumps.
pub fn blackwell_jump_at<T: Scalar>(
    model: &Model<T>,
    params: BlackwellParams,
    n0: usize,
) -> Result<StationaryPolicy, T> {
    StationaryPolicy::from_fn(model, |s| {
        if s.0 < params.depth && s.0 + 1 >= n0 {
            JUMP
        } else {
            CONTINUE
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbcParams {
    pub max_gamble_index: usize,
}

pub const ABC_A: StateId = StateId(0);
pub const ABC_B: StateId = StateId(1);
pub const ABC_C: StateId = StateId(2);

/// Three-state signed system: `b` returns to `a`; at `a` gamble `n` (one
/// action per `n` in `2..=max_gamble_index`) loses a dollar moving to the
/// absorbing `c` with probability `1/n` and otherwise moves to `b` for free.
/// Action `k` at `a` is gamble `n = k + 2`.
pub fn ornstein_abc<T: Scalar>(params: AbcParams) -> Result<Model<T>, T> {
    if params.max_gamble_index < 2 {
        return Err(Error::InvalidParameter(
            "gamble indices start at 2".into(),
        ));
    }
    let mut b = ModelBuilder::new(Regime::Signed);
    let a = b.add_state("a");
    let bb = b.add_state("b");
    let c = b.add_state("c");
    for n in 2..=params.max_gamble_index {
        let lose = T::one() / T::from_usize(n).expect("small integer");
        b.add_action(
            a,
            format!("gamble({n})"),
            [(c, lose, -T::one()), (bb, T::one() - lose, T::zero())],
        );
    }
    b.add_action(bb, "return", [(a, T::one(), T::zero())]);
    b.add_action(c, "stay", [(c, T::one(), T::zero())]);
    b.build_validated()
}

pub fn abc_gamble(n: usize) -> ActionId {
    ActionId(n - 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HouseParams {
    pub states: usize,
    pub gambles_per_state: usize,
    pub seed: u64,
}

impl HouseParams {
    pub fn goal(&self) -> StateId {
        StateId(self.states)
    }

    pub fn dead_end(&self) -> StateId {
        StateId(self.states + 1)
    }
}

/// Seeded goal-reaching house: states `x(0..S)`, then the goal `g` and the
/// dead end `b`, both absorbing. Each `x(i)` offers `gambles_per_state`
/// random distributions over a few of the other states, `g` and `b`; every
/// transition into `g` pays one, so the optimal return is the maximal
/// probability of reaching `g`.
pub fn goal_reaching_house<T: Scalar>(params: HouseParams) -> Result<Model<T>, T> {
    if params.states == 0 || params.gambles_per_state == 0 {
        return Err(Error::InvalidParameter(
            "a house needs states and gambles".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let s = params.states;
    let mut b = ModelBuilder::with_capacity(Regime::Positive, s + 2);
    for i in 0..s {
        b.add_state(format!("x({i})"));
    }
    let goal = b.add_state("g");
    let dead = b.add_state("b");
    for i in 0..s {
        // candidates: the other x's, then g and b
        let candidates: Vec<StateId> = (0..s)
            .filter(|&j| j != i)
            .map(StateId)
            .chain([goal, dead])
            .collect();
        for k in 0..params.gambles_per_state {
            let support = rng.random_range(2..=4).min(candidates.len());
            let picks = sample(&mut rng, candidates.len(), support).into_vec();
            let weights: Vec<f64> = picks.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let row = normalized_row(&picks, &weights, |j| {
                let target = candidates[j];
                let reward = if target == goal { T::one() } else { T::zero() };
                (target, reward)
            });
            b.add_action(StateId(i), format!("v({k})"), row);
        }
    }
    b.add_action(goal, "stay", [(goal, T::one(), T::zero())]);
    b.add_action(dead, "stay", [(dead, T::one(), T::zero())]);
    b.build_validated()
}

/// Seeded random positive model over `s(0..states)` plus an absorbing
/// `sink`. Every row sends at least `absorb_prob` to the sink; all other
/// mass goes to up to three random states. Rewards are uniform in `[0, 1)`.
pub fn random_positive_mdp<T: Scalar>(
    states: usize,
    actions: usize,
    absorb_prob: f64,
    seed: u64,
) -> Result<Model<T>, T> {
    if states == 0 || actions == 0 {
        return Err(Error::InvalidParameter(
            "need at least one state and action".into(),
        ));
    }
    if !(absorb_prob > 0.0 && absorb_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "absorption probability {absorb_prob} outside (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ModelBuilder::with_capacity(Regime::Positive, states + 1);
    for i in 0..states {
        b.add_state(format!("s({i})"));
    }
    let sink = b.add_state("sink");
    for i in 0..states {
        for a in 0..actions {
            let mut row = vec![(sink, T::lit(absorb_prob), T::lit(rng.random::<f64>()))];
            if absorb_prob < 1.0 {
                let k = rng.random_range(1..=3usize).min(states);
                let picks = sample(&mut rng, states, k).into_vec();
                let weights: Vec<f64> = picks.iter().map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let rest = 1.0 - absorb_prob;
                let mut used = absorb_prob;
                for (idx, (&j, w)) in picks.iter().zip(&weights).enumerate() {
                    let p = if idx + 1 == picks.len() {
                        1.0 - used
                    } else {
                        rest * w / total
                    };
                    used += p;
                    row.push((StateId(j), T::lit(p), T::lit(rng.random::<f64>())));
                }
            }
            b.add_action(StateId(i), format!("a({a})"), row);
        }
    }
    b.add_action(sink, "stay", [(sink, T::one(), T::zero())]);
    b.build_validated()
}

fn normalized_row<T: Scalar>(
    picks: &[usize],
    weights: &[f64],
    mut label: impl FnMut(usize) -> (StateId, T),
) -> Vec<(StateId, T, T)> {
    let total: f64 = weights.iter().sum();
    let mut used = 0.0;
    picks
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(idx, (&j, w))| {
            let p = if idx + 1 == picks.len() {
                1.0 - used
            } else {
                w / total
            };
            used += p;
            let (target, reward) = label(j);
            (target, T::lit(p), reward)
        })
        .collect()
}
