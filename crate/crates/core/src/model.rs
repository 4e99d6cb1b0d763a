//! Finite dynamic-programming systems: states, per-state action lists and
//! sparse transition rows carrying per-transition rewards.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

/// Index into the action list of one particular state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sign convention for rewards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Every reward is nonnegative.
    Positive,
    /// Rewards may take either sign.
    Signed,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Positive => "positive",
            Regime::Signed => "signed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub target: StateId,
    pub probability: T,
    pub reward: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action<T> {
    pub label: String,
    pub row: Vec<Transition<T>>,
}

/// An explicit finite system. Rows are kept sorted by target index, so two
/// models built from the same data compare equal regardless of the order
/// transitions were supplied in.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    labels: Vec<String>,
    actions: Vec<Vec<Action<T>>>,
    regime: Regime,
}

impl<T: Scalar> Model<T> {
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = StateId> + Clone {
        (0..self.labels.len()).map(StateId)
    }

    pub fn label(&self, state: StateId) -> &str {
        &self.labels[state.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state_by_label(&self, label: &str) -> Option<StateId> {
        self.labels.iter().position(|l| l == label).map(StateId)
    }

    pub fn actions(&self, state: StateId) -> &[Action<T>] {
        &self.actions[state.0]
    }

    pub fn num_actions(&self, state: StateId) -> usize {
        self.actions[state.0].len()
    }

    pub fn has_action(&self, state: StateId, action: ActionId) -> bool {
        state.0 < self.labels.len() && action.0 < self.actions[state.0].len()
    }

    pub fn action_label(&self, state: StateId, action: ActionId) -> &str {
        &self.actions[state.0][action.0].label
    }

    pub fn action_by_label(&self, state: StateId, label: &str) -> Option<ActionId> {
        self.actions[state.0]
            .iter()
            .position(|a| a.label == label)
            .map(ActionId)
    }

    pub fn row(&self, state: StateId, action: ActionId) -> &[Transition<T>] {
        &self.actions[state.0][action.0].row
    }

    /// Expected immediate reward of `action` at `state`.
    pub fn expected_reward(&self, state: StateId, action: ActionId) -> T {
        self.row(state, action)
            .iter()
            .map(|t| t.probability * t.reward)
            .sum()
    }

    /// One-step lookahead value `Σ q(s'|s,a) [r(s,a,s') + β u(s')]`.
    pub fn q_value(&self, state: StateId, action: ActionId, u: &[T], beta: T) -> T {
        self.row(state, action)
            .iter()
            .map(|t| t.probability * (t.reward + beta * u[t.target.0]))
            .sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.actions.iter().flatten().map(|a| a.row.len()).sum()
    }

    pub fn max_abs_reward(&self) -> T {
        self.actions
            .iter()
            .flatten()
            .flat_map(|a| a.row.iter())
            .map(|t| t.reward.abs())
            .fold(T::zero(), T::max)
    }

    /// All `(state, action)` pairs in index order.
    pub fn state_actions(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .flat_map(|(s, acts)| (0..acts.len()).map(move |a| (StateId(s), ActionId(a))))
    }

    /// Number of deterministic stationary policies, saturating.
    pub fn stationary_policy_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }

    pub fn is_absorbing(&self, state: StateId) -> bool {
        let acts = &self.actions[state.0];
        !acts.is_empty()
            && acts.iter().all(|a| {
                a.row.len() == 1
                    && a.row[0].target == state
                    && a.row[0].probability == T::one()
                    && a.row[0].reward == T::zero()
            })
    }

    /// States from which no nonzero-reward transition is reachable under
    /// any choice of actions. Every plan collects nothing from them.
    pub fn dead_states(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut alive = vec![false; n];
        let mut stack = Vec::new();
        for (s, acts) in self.actions.iter().enumerate() {
            for t in acts.iter().flat_map(|a| a.row.iter()) {
                preds[t.target.0].push(s);
                if t.reward != T::zero() && t.probability > T::zero() && !alive[s] {
                    alive[s] = true;
                    stack.push(s);
                }
            }
        }
        while let Some(s) = stack.pop() {
            for &p in &preds[s] {
                if !alive[p] {
                    alive[p] = true;
                    stack.push(p);
                }
            }
        }
        alive.into_iter().map(|a| !a).collect()
    }

    pub fn validate(&self) -> ValidationReport<T> {
        validate_model(self)
    }

    pub(crate) fn into_validated(self) -> Result<Self, T> {
        let report = validate_model(&self);
        if report.ok {
            Ok(self)
        } else {
            Err(Error::InvalidModel(report))
        }
    }
}

/// Incremental construction of a [`Model`].
#[derive(Clone, Debug)]
pub struct ModelBuilder<T> {
    labels: Vec<String>,
    actions: Vec<Vec<Action<T>>>,
    regime: Regime,
}

impl<T: Scalar> ModelBuilder<T> {
    pub fn new(regime: Regime) -> Self {
        Self {
            labels: Vec::new(),
            actions: Vec::new(),
            regime,
        }
    }

    pub fn with_capacity(regime: Regime, states: usize) -> Self {
        Self {
            labels: Vec::with_capacity(states),
            actions: Vec::with_capacity(states),
            regime,
        }
    }

    pub fn add_state(&mut self, label: impl Into<String>) -> StateId {
        self.labels.push(label.into());
        self.actions.push(Vec::new());
        StateId(self.labels.len() - 1)
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    /// Appends an action with `(target, probability, reward)` transitions.
    pub fn add_action<I>(&mut self, state: StateId, label: impl Into<String>, row: I) -> ActionId
    where
        I: IntoIterator<Item = (StateId, T, T)>,
    {
        let row = row
            .into_iter()
            .map(|(target, probability, reward)| Transition {
                target,
                probability,
                reward,
            })
            .collect();
        let acts = &mut self.actions[state.0];
        acts.push(Action {
            label: label.into(),
            row,
        });
        ActionId(acts.len() - 1)
    }

    /// Finishes construction without validation; see [`validate_model`].
    pub fn build(mut self) -> Model<T> {
        for act in self.actions.iter_mut().flatten() {
            act.row.sort_by_key(|t| t.target);
        }
        Model {
            labels: self.labels,
            actions: self.actions,
            regime: self.regime,
        }
    }

    pub fn build_validated(self) -> Result<Model<T>, T> {
        self.build().into_validated()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Model,
    State(StateId),
    Action(StateId, ActionId),
    Transition(StateId, ActionId, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T> {
    pub location: Location,
    pub description: String,
    pub magnitude: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T> {
    pub ok: bool,
    pub violations: Vec<Violation<T>>,
}

impl<T: Scalar> fmt::Display for ValidationReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}", v.description)?;
        }
        Ok(())
    }
}

pub fn is_valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '(' | ')' | '.' | '-'))
}

/// Checks every structural invariant of `model`, collecting all breaches.
pub fn validate_model<T: Scalar>(model: &Model<T>) -> ValidationReport<T> {
    let mut violations = Vec::new();
    let mut push = |location, description: String, magnitude: T| {
        violations.push(Violation {
            location,
            description,
            magnitude,
        })
    };
    let n = model.num_states();
    if n == 0 {
        push(Location::Model, "model has no states".into(), T::zero());
    }

    let mut seen = HashMap::new();
    for s in model.states() {
        let label = model.label(s);
        if !is_valid_label(label) {
            push(
                Location::State(s),
                format!("state {} has invalid label {label:?}", s.0),
                T::zero(),
            );
        }
        if let Some(first) = seen.insert(label, s) {
            push(
                Location::State(s),
                format!("duplicate state label {label} (also state {})", first.0),
                T::zero(),
            );
        }
    }

    let tol = T::lit(T::ROW_TOLERANCE);
    for s in model.states() {
        let slabel = model.label(s);
        if model.num_actions(s) == 0 {
            push(
                Location::State(s),
                format!("state {slabel} has no actions"),
                T::zero(),
            );
        }
        let mut action_labels = HashSet::new();
        for (ai, act) in model.actions(s).iter().enumerate() {
            let a = ActionId(ai);
            let at = format!("({slabel}, {})", act.label);
            if !is_valid_label(&act.label) {
                push(
                    Location::Action(s, a),
                    format!("invalid action label {:?} at state {slabel}", act.label),
                    T::zero(),
                );
            }
            if !action_labels.insert(act.label.as_str()) {
                push(
                    Location::Action(s, a),
                    format!("duplicate action label at {at}"),
                    T::zero(),
                );
            }
            if act.row.is_empty() {
                push(Location::Action(s, a), format!("empty row at {at}"), T::zero());
            }
            let mut mass = T::zero();
            let mut targets = HashSet::new();
            for (ti, t) in act.row.iter().enumerate() {
                let loc = Location::Transition(s, a, ti);
                if t.target.0 >= n {
                    push(
                        loc,
                        format!("target {} out of range at {at}", t.target.0),
                        T::zero(),
                    );
                } else if !targets.insert(t.target) {
                    push(
                        loc,
                        format!("duplicate target {} at {at}", model.label(t.target)),
                        T::zero(),
                    );
                }
                if !t.probability.is_finite()
                    || t.probability <= T::zero()
                    || t.probability > T::one() + tol
                {
                    push(
                        loc,
                        format!("probability {} outside (0, 1] at {at}", t.probability),
                        t.probability,
                    );
                }
                if !t.reward.is_finite() {
                    push(loc, format!("non-finite reward at {at}"), t.reward);
                } else if model.regime == Regime::Positive && t.reward < T::zero() {
                    push(
                        loc,
                        format!("negative reward {} in positive model at {at}", t.reward),
                        t.reward,
                    );
                }
                mass += t.probability;
            }
            if !act.row.is_empty() && !((mass - T::one()).abs() <= tol) {
                push(
                    Location::Action(s, a),
                    format!("row mass {mass} at {at}"),
                    mass,
                );
            }
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// States whose every action is a zero-reward self-loop of probability one.
pub fn absorbing_states<T: Scalar>(model: &Model<T>) -> BTreeSet<StateId> {
    model.states().filter(|&s| model.is_absorbing(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(prob: f64, reward: f64, regime: Regime) -> Model<f64> {
        let mut b = ModelBuilder::new(regime);
        let p1 = b.add_state("p(1)");
        let t = b.add_state("t");
        b.add_action(p1, "continue", [(p1, prob, reward)]);
        b.add_action(t, "stay", [(t, 1.0, 0.0)]);
        b.build()
    }

    #[test]
    fn row_mass_violation_names_location() {
        let m = two_state(0.9, 0.0, Regime::Positive);
        let report = validate_model(&m);
        assert!(!report.ok);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.description, "row mass 0.9 at (p(1), continue)");
        assert_eq!(v.location, Location::Action(StateId(0), ActionId(0)));
        assert_eq!(v.magnitude, 0.9);
    }

    #[test]
    fn negative_reward_in_positive_model() {
        let m = two_state(1.0, -1.0, Regime::Positive);
        let report = validate_model(&m);
        assert!(!report.ok);
        assert!(matches!(
            report.violations[0].location,
            Location::Transition(StateId(0), ActionId(0), 0)
        ));
        assert!(report.violations[0].description.contains("negative reward"));
        // the same data is fine under the signed regime
        assert!(validate_model(&two_state(1.0, -1.0, Regime::Signed)).ok);
    }

    #[test]
    fn structural_defects_are_all_reported() {
        let mut b = ModelBuilder::<f64>::new(Regime::Signed);
        let x = b.add_state("x");
        let dup = b.add_state("x");
        let _bare = b.add_state("no actions");
        b.add_action(x, "go", [(StateId(7), 1.0, 0.0)]);
        b.add_action(x, "go", [(x, 0.5, f64::NAN), (x, 0.5, 0.0)]);
        b.add_action(dup, "zero", [(dup, 0.0, 0.0), (x, 1.0, 0.0)]);
        let report = validate_model(&b.build());
        let text = report.to_string();
        for needle in [
            "duplicate state label x",
            "invalid label",
            "has no actions",
            "out of range",
            "duplicate action label",
            "non-finite reward",
            "duplicate target",
            "probability 0 outside",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in {text}");
        }
    }

    #[test]
    fn absorbing_detection() {
        let m = two_state(1.0, 1.0, Regime::Positive);
        assert_eq!(absorbing_states(&m), BTreeSet::from([StateId(1)]));
        // self-loop paying a reward is not absorbing
        assert!(!m.is_absorbing(StateId(0)));

        let mut b = ModelBuilder::<f64>::new(Regime::Positive);
        let x = b.add_state("x");
        let y = b.add_state("y");
        b.add_action(x, "go", [(y, 1.0, 0.0)]);
        b.add_action(y, "go", [(x, 1.0, 0.0)]);
        assert!(absorbing_states(&b.build()).is_empty());
    }

    #[test]
    fn rows_are_sorted_by_target() {
        let mut b = ModelBuilder::<f64>::new(Regime::Positive);
        let x = b.add_state("x");
        let y = b.add_state("y");
        b.add_action(x, "go", [(y, 0.25, 0.0), (x, 0.75, 1.0)]);
        b.add_action(y, "stay", [(y, 1.0, 0.0)]);
        let m = b.build();
        assert_eq!(m.row(x, ActionId(0))[0].target, x);
        assert_eq!(m.expected_reward(x, ActionId(0)), 0.75);
        assert_eq!(m.dead_states(), vec![false, true]);
    }
}
