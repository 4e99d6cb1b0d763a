#![allow(dead_code)]

use posdp::instances::{blackwell_counterexample, BlackwellParams};
use posdp::{ActionId, MarkovPolicy, Model, StateId, StationaryPolicy};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn blackwell(depth: usize, lumped: bool) -> (Model, BlackwellParams) {
    let params = if lumped {
        BlackwellParams::lumped(depth)
    } else {
        BlackwellParams::explicit(depth)
    };
    (blackwell_counterexample(params).unwrap(), params)
}

/// `2^n - 2^{n-N}`, the optimal return at `p(n)` on the depth-`N` truncation.
pub fn blackwell_optimum(n: usize, depth: usize) -> f64 {
    2f64.powi(n as i32) - 2f64.powi(n as i32 - depth as i32)
}

pub fn random_stationary(model: &Model, rng: &mut ChaCha8Rng) -> StationaryPolicy {
    StationaryPolicy::from_fn(model, |s| ActionId(rng.random_range(0..model.num_actions(s)))).unwrap()
}

pub fn random_markov(model: &Model, rng: &mut ChaCha8Rng, stages: usize) -> MarkovPolicy {
    let table = (0..stages)
        .map(|_| {
            model
                .states()
                .map(|s| ActionId(rng.random_range(0..model.num_actions(s))))
                .collect()
        })
        .collect();
    let tail = random_stationary(model, rng);
    MarkovPolicy::new(model, table, tail).unwrap()
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: got {actual}, expected {expected} (tol {tol})"
    );
}

pub fn state(model: &Model, label: &str) -> StateId {
    model
        .state_by_label(label)
        .unwrap_or_else(|| panic!("no state {label}"))
}
