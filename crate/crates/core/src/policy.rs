//! Deterministic plans: stationary, Markov, semi-Markov and history-dependent.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ActionId, Model, StateId};
use crate::scalar::Scalar;

/// One action per state, applied at every stage.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StationaryPolicy {
    choice: Vec<ActionId>,
}

impl StationaryPolicy {
    pub fn new<T: Scalar>(model: &Model<T>, choice: Vec<ActionId>) -> Result<Self, T> {
        check_table(model, &choice)?;
        Ok(Self { choice })
    }

    pub fn from_fn<T: Scalar>(
        model: &Model<T>,
        mut f: impl FnMut(StateId) -> ActionId,
    ) -> Result<Self, T> {
        Self::new(model, model.states().map(&mut f).collect())
    }

    /// The policy choosing the first listed action everywhere.
    pub fn first_actions<T: Scalar>(model: &Model<T>) -> Self {
        Self {
            choice: vec![ActionId(0); model.num_states()],
        }
    }

    #[inline]
    pub fn action(&self, state: StateId) -> ActionId {
        self.choice[state.0]
    }

    pub fn choices(&self) -> &[ActionId] {
        &self.choice
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub(crate) fn from_choices_unchecked(choice: Vec<ActionId>) -> Self {
        Self { choice }
    }
}

/// Stage-dependent tables of the current state, then a stationary tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovPolicy {
    stages: Vec<Vec<ActionId>>,
    tail: StationaryPolicy,
}

impl MarkovPolicy {
    pub fn new<T: Scalar>(
        model: &Model<T>,
        stages: Vec<Vec<ActionId>>,
        tail: StationaryPolicy,
    ) -> Result<Self, T> {
        for table in &stages {
            check_table(model, table)?;
        }
        check_table(model, tail.choices())?;
        Ok(Self { stages, tail })
    }

    /// Action at 1-based `stage`.
    pub fn action(&self, stage: usize, state: StateId) -> ActionId {
        match stage.checked_sub(1).and_then(|k| self.stages.get(k)) {
            Some(table) => table[state.0],
            None => self.tail.action(state),
        }
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn tail(&self) -> &StationaryPolicy {
        &self.tail
    }
}

/// Tables indexed by `(stage, initial state, current state)`, then a
/// stationary tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemiMarkovPolicy {
    // stages[k][initial][current]
    stages: Vec<Vec<Vec<ActionId>>>,
    tail: StationaryPolicy,
}

impl SemiMarkovPolicy {
    pub fn new<T: Scalar>(
        model: &Model<T>,
        stages: Vec<Vec<Vec<ActionId>>>,
        tail: StationaryPolicy,
    ) -> Result<Self, T> {
        for (k, by_initial) in stages.iter().enumerate() {
            if by_initial.len() != model.num_states() {
                return Err(Error::InvalidPolicy(format!(
                    "stage {} has {} initial-state tables, model has {} states",
                    k + 1,
                    by_initial.len(),
                    model.num_states()
                )));
            }
            for table in by_initial {
                check_table(model, table)?;
            }
        }
        check_table(model, tail.choices())?;
        Ok(Self { stages, tail })
    }

    /// Builds the tables from a rule over `(initial, stage, current)` for
    /// stages `1..=stage_count`.
    pub fn from_fn<T: Scalar>(
        model: &Model<T>,
        stage_count: usize,
        mut rule: impl FnMut(StateId, usize, StateId) -> ActionId,
        tail: StationaryPolicy,
    ) -> Result<Self, T> {
        let stages = (1..=stage_count)
            .map(|k| {
                model
                    .states()
                    .map(|init| model.states().map(|cur| rule(init, k, cur)).collect())
                    .collect()
            })
            .collect();
        Self::new(model, stages, tail)
    }

    pub fn action(&self, initial: StateId, stage: usize, state: StateId) -> ActionId {
        match stage.checked_sub(1).and_then(|k| self.stages.get(k)) {
            Some(by_initial) => by_initial[initial.0][state.0],
            None => self.tail.action(state),
        }
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }
}

type HistoryRule = dyn Fn(&[(StateId, ActionId)], StateId) -> ActionId + Send + Sync;

/// Arbitrary deterministic rule of the full history. The rule must be a
/// pure function; the returned action is checked against the model at use.
#[derive(Clone)]
pub struct HistoryPolicy {
    rule: Arc<HistoryRule>,
}

impl HistoryPolicy {
    pub fn new(
        rule: impl Fn(&[(StateId, ActionId)], StateId) -> ActionId + Send + Sync + 'static,
    ) -> Self {
        Self {
            rule: Arc::new(rule),
        }
    }

    pub fn select(&self, history: &[(StateId, ActionId)], current: StateId) -> ActionId {
        (self.rule)(history, current)
    }
}

impl fmt::Debug for HistoryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HistoryPolicy(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Policy {
    Stationary(StationaryPolicy),
    Markov(MarkovPolicy),
    SemiMarkov(SemiMarkovPolicy),
    History(HistoryPolicy),
}

impl Policy {
    /// Action taken at 1-based `stage` in state `current`, given the start
    /// state and the `(state, action)` pairs of the earlier stages.
    pub fn select_action<T: Scalar>(
        &self,
        model: &Model<T>,
        initial: StateId,
        stage: usize,
        history: &[(StateId, ActionId)],
        current: StateId,
    ) -> Result<ActionId, T> {
        let action = match self {
            Policy::Stationary(f) => f.action(current),
            Policy::Markov(m) => m.action(stage, current),
            Policy::SemiMarkov(sm) => sm.action(initial, stage, current),
            Policy::History(h) => h.select(history, current),
        };
        if !model.has_action(current, action) {
            return Err(Error::InvalidAction {
                state: current,
                action,
                stage,
            });
        }
        Ok(action)
    }

    /// Whether the action depends on anything beyond stage, start and
    /// current state.
    pub fn needs_history(&self) -> bool {
        matches!(self, Policy::History(_))
    }
}

impl From<StationaryPolicy> for Policy {
    fn from(f: StationaryPolicy) -> Self {
        Policy::Stationary(f)
    }
}

impl From<MarkovPolicy> for Policy {
    fn from(m: MarkovPolicy) -> Self {
        Policy::Markov(m)
    }
}

impl From<SemiMarkovPolicy> for Policy {
    fn from(sm: SemiMarkovPolicy) -> Self {
        Policy::SemiMarkov(sm)
    }
}

impl From<HistoryPolicy> for Policy {
    fn from(h: HistoryPolicy) -> Self {
        Policy::History(h)
    }
}

fn check_table<T: Scalar>(model: &Model<T>, table: &[ActionId]) -> Result<(), T> {
    if table.len() != model.num_states() {
        return Err(Error::InvalidPolicy(format!(
            "table covers {} states, model has {}",
            table.len(),
            model.num_states()
        )));
    }
    for (s, &a) in table.iter().enumerate() {
        if !model.has_action(StateId(s), a) {
            return Err(Error::InvalidPolicy(format!(
                "action {} does not exist at state {}",
                a.0,
                model.label(StateId(s))
            )));
        }
    }
    Ok(())
}

/// Markov plan that takes `continue` for the first `k` stages and `jump`
/// from then on, on every state offering both actions. States without them
/// use their first action. A state whose `continue` row leads only into
/// absorbing states (the last primary state of a truncation) jumps at every
/// stage.
pub fn delay_then_jump<T: Scalar>(model: &Model<T>, k: usize) -> Result<MarkovPolicy, T> {
    let mut wait = Vec::with_capacity(model.num_states());
    let mut jump = Vec::with_capacity(model.num_states());
    for s in model.states() {
        match (
            model.action_by_label(s, "continue"),
            model.action_by_label(s, "jump"),
        ) {
            (Some(c), Some(j)) => {
                let dead_end = model.row(s, c).iter().all(|t| model.is_absorbing(t.target));
                wait.push(if dead_end { j } else { c });
                jump.push(j);
            }
            _ => {
                wait.push(ActionId(0));
                jump.push(ActionId(0));
            }
        }
    }
    let tail = StationaryPolicy::new(model, jump)?;
    MarkovPolicy::new(model, vec![wait; k], tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, Regime};

    fn chain() -> Model<f64> {
        let mut b = ModelBuilder::new(Regime::Positive);
        let p: Vec<_> = (1..=3).map(|n| b.add_state(format!("p({n})"))).collect();
        let t = b.add_state("t");
        for (i, &s) in p.iter().enumerate() {
            let next = p.get(i + 1).copied().unwrap_or(t);
            b.add_action(s, "continue", [(next, 1.0, 0.0)]);
            b.add_action(s, "jump", [(t, 1.0, 1.0)]);
        }
        b.add_action(t, "stay", [(t, 1.0, 0.0)]);
        b.build()
    }

    #[test]
    fn stationary_reads_only_current_state() {
        let m = chain();
        let jump = ActionId(1);
        let f = StationaryPolicy::from_fn(&m, |s| if s == StateId(2) { jump } else { ActionId(0) })
            .unwrap();
        let policy = Policy::from(f);
        let hist = [(StateId(0), ActionId(0)), (StateId(1), ActionId(0))];
        for stage in 1..6 {
            for init in m.states() {
                for h in 0..=hist.len() {
                    let a = policy
                        .select_action(&m, init, stage, &hist[..h], StateId(2))
                        .unwrap();
                    assert_eq!(a, jump);
                }
            }
        }
    }

    #[test]
    fn markov_table_then_tail() {
        let m = chain();
        let cont = vec![ActionId(0); 4];
        let jump = vec![ActionId(1), ActionId(1), ActionId(1), ActionId(0)];
        let tail = StationaryPolicy::new(&m, cont.clone()).unwrap();
        let mp = MarkovPolicy::new(&m, vec![cont, jump], tail).unwrap();
        let policy = Policy::from(mp);
        let a = policy.select_action(&m, StateId(0), 2, &[], StateId(1)).unwrap();
        assert_eq!(a, ActionId(1));
        let a = policy.select_action(&m, StateId(3), 1, &[], StateId(1)).unwrap();
        assert_eq!(a, ActionId(0));
        // beyond the table the tail applies
        let a = policy.select_action(&m, StateId(0), 9, &[], StateId(1)).unwrap();
        assert_eq!(a, ActionId(0));
    }

    #[test]
    fn semi_markov_reads_initial_state() {
        let m = chain();
        let tail = StationaryPolicy::first_actions(&m);
        let sm = SemiMarkovPolicy::from_fn(
            &m,
            6,
            |init, k, cur| {
                if init == StateId(0) && k >= 5 && cur != StateId(3) {
                    ActionId(1)
                } else {
                    ActionId(0)
                }
            },
            tail,
        )
        .unwrap();
        let policy = Policy::from(sm);
        assert_eq!(
            policy.select_action(&m, StateId(0), 5, &[], StateId(0)).unwrap(),
            ActionId(1)
        );
        assert_eq!(
            policy.select_action(&m, StateId(0), 4, &[], StateId(0)).unwrap(),
            ActionId(0)
        );
        assert_eq!(
            policy.select_action(&m, StateId(1), 5, &[], StateId(0)).unwrap(),
            ActionId(0)
        );
    }

    #[test]
    fn history_policy_invalid_action_is_reported() {
        let m = chain();
        let policy = Policy::from(HistoryPolicy::new(|hist, _| ActionId(hist.len())));
        assert_eq!(
            policy.select_action(&m, StateId(0), 1, &[], StateId(0)).unwrap(),
            ActionId(0)
        );
        let hist = [(StateId(0), ActionId(0)); 2];
        let err = policy
            .select_action(&m, StateId(0), 3, &hist, StateId(1))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidAction { stage: 3, .. }));
    }

    #[test]
    fn tables_must_be_total_and_valid() {
        let m = chain();
        assert!(StationaryPolicy::new(&m, vec![ActionId(0); 3]).is_err());
        assert!(StationaryPolicy::new(&m, vec![ActionId(1); 4]).is_err());
    }

    #[test]
    fn delay_then_jump_jumps_at_boundary() {
        let m = chain();
        let mp = delay_then_jump(&m, 2).unwrap();
        assert_eq!(mp.action(1, StateId(0)), ActionId(0));
        assert_eq!(mp.action(2, StateId(1)), ActionId(0));
        // p(3)'s continue leads only to t
        assert_eq!(mp.action(1, StateId(2)), ActionId(1));
        assert_eq!(mp.action(3, StateId(0)), ActionId(1));
        assert_eq!(mp.action(1, StateId(3)), ActionId(0));
        assert_eq!(delay_then_jump(&m, 0).unwrap().stage_count(), 0);
    }
}
