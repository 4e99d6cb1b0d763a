//! Linear systems of the Markov chain induced by a stationary policy,
//! solved one strongly connected component at a time.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::model::{Model, StateId};
use crate::policy::StationaryPolicy;
use crate::scalar::Scalar;

pub(crate) struct Chain<T> {
    pub succ: Vec<Vec<(usize, T)>>,
    pub reward: Vec<T>,
    /// Whether the state's row holds a nonzero reward.
    pub pays: Vec<bool>,
}

impl<T: Scalar> Chain<T> {
    pub fn new(model: &Model<T>, f: &StationaryPolicy) -> Self {
        let mut succ = Vec::with_capacity(model.num_states());
        let mut reward = Vec::with_capacity(model.num_states());
        let mut pays = Vec::with_capacity(model.num_states());
        for s in model.states() {
            let row = model.row(s, f.action(s));
            succ.push(row.iter().map(|t| (t.target.0, t.probability)).collect());
            reward.push(model.expected_reward(s, f.action(s)));
            pays.push(row.iter().any(|t| t.reward != T::zero()));
        }
        Self { succ, reward, pays }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    /// States from which some state in `targets` is reachable.
    pub fn can_reach(&self, targets: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut preds = vec![Vec::new(); n];
        for (s, row) in self.succ.iter().enumerate() {
            for &(t, _) in row {
                preds[t].push(s);
            }
        }
        let mut mark = targets.to_vec();
        let mut stack: Vec<usize> = (0..n).filter(|&s| targets[s]).collect();
        while let Some(s) = stack.pop() {
            for &p in &preds[s] {
                if !mark[p] {
                    mark[p] = true;
                    stack.push(p);
                }
            }
        }
        mark
    }

    /// Solves `x = rhs + γ P x` on the unfixed states, with fixed states
    /// taking their given value. Components are handled in reverse
    /// topological order so each dense solve only involves one component.
    /// Returns the offending state when a component's system is singular.
    pub fn solve(&self, rhs: &[T], gamma: T, fixed: &[Option<T>]) -> Result<Vec<T>, StateId> {
        let n = self.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
        for _ in 0..n {
            graph.add_node(());
        }
        for (s, row) in self.succ.iter().enumerate() {
            for &(t, _) in row {
                graph.add_edge(NodeIndex::new(s), NodeIndex::new(t), ());
            }
        }

        let mut x = vec![T::zero(); n];
        let mut known = vec![false; n];
        for (s, v) in fixed.iter().enumerate() {
            if let Some(v) = v {
                x[s] = *v;
                known[s] = true;
            }
        }
        let mut local = vec![usize::MAX; n];
        for component in tarjan_scc(&graph) {
            let members: Vec<usize> = component
                .iter()
                .map(|ix| ix.index())
                .filter(|&s| !known[s])
                .collect();
            if members.is_empty() {
                continue;
            }
            let k = members.len();
            for (i, &s) in members.iter().enumerate() {
                local[s] = i;
            }
            let mut a = vec![T::zero(); k * k];
            let mut b = vec![T::zero(); k];
            for (i, &s) in members.iter().enumerate() {
                a[i * k + i] = T::one();
                b[i] = rhs[s];
                for &(t, p) in &self.succ[s] {
                    if known[t] {
                        b[i] += gamma * p * x[t];
                    } else {
                        a[i * k + local[t]] -= gamma * p;
                    }
                }
            }
            if !solve_dense(&mut a, &mut b, k) {
                return Err(StateId(members[0]));
            }
            for (i, &s) in members.iter().enumerate() {
                x[s] = b[i];
                known[s] = true;
                local[s] = usize::MAX;
            }
        }
        Ok(x)
    }
}

/// Gaussian elimination with partial pivoting on a row-major `k × k`
/// system; the solution overwrites `b`. Returns false on a (numerically)
/// singular matrix.
pub(crate) fn solve_dense<T: Scalar>(a: &mut [T], b: &mut [T], k: usize) -> bool {
    let eps = T::epsilon() * T::lit(64.0);
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&i, &j| {
                a[i * k + col]
                    .abs()
                    .partial_cmp(&a[j * k + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        let pivot = a[pivot_row * k + col];
        if !(pivot.abs() > eps) {
            return false;
        }
        if pivot_row != col {
            for j in 0..k {
                a.swap(col * k + j, pivot_row * k + j);
            }
            b.swap(col, pivot_row);
        }
        for i in col + 1..k {
            let factor = a[i * k + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            for j in col..k {
                let v = a[col * k + j];
                a[i * k + j] -= factor * v;
            }
            let v = b[col];
            b[i] -= factor * v;
        }
    }
    for col in (0..k).rev() {
        let mut acc = b[col];
        for j in col + 1..k {
            acc -= a[col * k + j] * b[j];
        }
        b[col] = acc / a[col * k + col];
    }
    true
}
