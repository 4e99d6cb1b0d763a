mod common;

use common::{assert_close, blackwell, blackwell_optimum, state};
use posdp::eval::{evaluate_stationary_linear, is_terminating};
use posdp::instances::*;
use posdp::solver::*;
use posdp::*;

fn optimum(m: &Model) -> ValueFunction {
    value_iterate(m, 1.0, 1e-13, 1_000_000).unwrap().0
}

#[test]
fn bellman_operator_examples() {
    let (m, p) = blackwell(5, true);
    let zero = ValueFunction::zeros(m.num_states(), 1.0);
    let u = bellman_discounted(&m, &zero, 0.9);
    assert_eq!(u.get(p.primary(2)), 3.0);
    for s in m.states() {
        let best = (0..m.num_actions(s))
            .map(|a| m.expected_reward(s, ActionId(a)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(bellman_discounted(&m, &zero, 0.3).get(s), best);
    }
    let c = ValueFunction::constant(m.num_states(), 4.0, 1.0);
    let shifted = bellman_discounted(&m, &c, 0.5);
    let base = bellman_discounted(&m, &zero, 0.5);
    for s in m.states() {
        assert_eq!(shifted.get(s), base.get(s) + 2.0);
    }

    let (e, pe) = blackwell(4, false);
    let k0 = bellman_positive(&e, &ValueFunction::zeros(e.num_states(), 1.0));
    for m_idx in 1..16 {
        assert_eq!(k0.get(pe.secondary(m_idx)), 1.0);
    }
    let (l, pl) = blackwell(4, true);
    let k0 = bellman_positive(&l, &ValueFunction::zeros(l.num_states(), 1.0));
    for n in 1..=4 {
        assert_eq!(k0.get(pl.primary(n)), 2f64.powi(n as i32) - 1.0);
    }
    let ustar = optimum(&l);
    assert!(bellman_positive(&l, &ustar).distance(&ustar) <= 1e-9);
}

#[test]
fn value_iteration_reproduces_closed_forms() {
    let (m, p) = blackwell(5, true);
    let (u, _) = value_iterate(&m, 1.0, 1e-12, 10_000).unwrap();
    assert_close(u.get(p.primary(1)), 1.9375, 1e-12, "u*(p(1))");
    assert!(u.converged);

    let (e, pe) = blackwell(6, false);
    let u = optimum(&e);
    for n in 1..=6 {
        assert_close(u.get(pe.primary(n)), blackwell_optimum(n, 6), 1e-12, "primary");
    }
    for k in 1..64 {
        assert_close(u.get(pe.secondary(k)), k as f64, 1e-12, "secondary");
    }
    assert_eq!(u.get(pe.terminal()), 0.0);

    let (u0, iterations) = value_iterate(&m, 0.0, 1e-12, 10).unwrap();
    assert_eq!(iterations, 2);
    assert_eq!(u0.get(p.primary(5)), 31.0);
}

#[test]
fn value_iteration_failures() {
    let mut b = ModelBuilder::new(Regime::Positive);
    let x = b.add_state("x");
    b.add_action(x, "loop", [(x, 1.0, 1.0)]);
    let m = b.build();
    assert!(matches!(
        value_iterate(&m, 1.0, 1e-9, 100),
        Err(Error::NotConverged { iterations: 100, .. })
    ));
    let mut b = ModelBuilder::new(Regime::Positive);
    let x = b.add_state("x");
    b.add_action(x, "loop", [(x, 1.0, 1e11)]);
    assert!(matches!(
        value_iterate(&b.build(), 1.0, 1e-9, usize::MAX),
        Err(Error::Divergent { .. })
    ));
    let abc = ornstein_abc(AbcParams { max_gamble_index: 3 }).unwrap();
    assert!(matches!(
        value_iterate(&abc, 1.0, 1e-9, 100),
        Err(Error::RegimeMismatch { .. })
    ));
}

#[test]
fn greedy_extraction() {
    let (m, p) = blackwell(5, true);
    let u = optimum(&m);
    let f = greedy_policy(&m, &u, 1.0);
    for n in 1..5 {
        assert_eq!(f.action(p.primary(n)), CONTINUE, "p({n})");
    }
    assert_eq!(f.action(p.primary(5)), JUMP);
    let myopic = greedy_policy(&m, &ValueFunction::zeros(m.num_states(), 1.0), 1.0);
    for n in 1..=5 {
        assert_eq!(myopic.action(p.primary(n)), JUMP);
    }

    let mut b = ModelBuilder::new(Regime::Positive);
    let x = b.add_state("x");
    b.add_action(x, "first", [(x, 1.0, 0.0)]);
    b.add_action(x, "second", [(x, 1.0, 0.0)]);
    let twins = b.build();
    let f = greedy_policy(&twins, &ValueFunction::zeros(1, 1.0), 1.0);
    assert_eq!(f.action(x), ActionId(0));
}

fn closed_form_certificate(m: &Model, p: &BlackwellParams) -> ValueFunction {
    let values = m
        .states()
        .map(|s| {
            if s.0 < p.depth {
                2f64.powi(s.0 as i32 + 1)
            } else if s == p.terminal() {
                0.0
            } else {
                (s.0 - p.depth) as f64
            }
        })
        .collect();
    ValueFunction::new(values, 1.0)
}

#[test]
fn excessivity_examples() {
    let (m, p) = blackwell(10, false);
    let u = closed_form_certificate(&m, &p);
    let rep = check_excessive(&m, &u, 1.0, 0.0).unwrap();
    assert!(rep.passes);
    assert!(rep.witness.is_none());
    // Continuing is tight (half of 2^{n+1}), jumping leaves a dollar.
    assert_eq!(rep.slack_at(p.primary(3), JUMP), 1.0);
    assert_eq!(rep.slack_at(p.primary(3), CONTINUE), 0.0);

    let zero = ValueFunction::zeros(m.num_states(), 1.0);
    let rep = check_excessive(&m, &zero, 1.0, 0.0).unwrap();
    assert!(!rep.passes);
    assert_eq!(rep.worst_violation, 1.0);
    let (s, _) = rep.witness.unwrap();
    assert!(s.0 > p.depth, "secondary witness, got {}", m.label(s));

    let (l, _) = blackwell(6, true);
    let mut shifted = optimum(&l);
    shifted.values.iter_mut().for_each(|v| *v += 5.0);
    assert!(check_excessive(&l, &shifted, 1.0, 0.0).unwrap().passes);

    let negative = ValueFunction::constant(l.num_states(), -1.0, 1.0);
    assert!(matches!(
        check_excessive(&l, &negative, 1.0, 0.0),
        Err(Error::NegativeCertificate { .. })
    ));
    assert!(check_excessive(&l, &negative, 0.5, 0.0).is_ok());
}

#[test]
fn pointwise_optimality_examples() {
    let (m, p) = blackwell(10, true);
    let ustar = optimum(&m);
    let dist = StateDistribution::uniform(&m, &p.primaries()).unwrap();
    let f = blackwell_jump_at(&m, p, 3).unwrap();
    let cfg = EvalConfig::default();
    let rep = check_p_eps_optimal(&m, &f, &dist, 0.5, &ustar, &cfg).unwrap();
    assert!(!rep.passes);
    assert_eq!(rep.witness, Some(p.primary(3)));
    assert_close(rep.deficit_at_witness, 0.9921875, 1e-9, "deficit");
    assert!(check_p_eps_optimal(&m, &f, &dist, 2.0, &ustar, &cfg).unwrap().passes);

    let at_t = StateDistribution::point(p.terminal());
    for n0 in 1..=11 {
        let f = blackwell_jump_at(&m, p, n0).unwrap();
        assert!(check_p_eps_optimal(&m, &f, &at_t, 1e-6, &ustar, &cfg).unwrap().passes);
    }
}

#[test]
fn weak_optimality_examples() {
    let (m, p) = blackwell(5, true);
    let ustar = optimum(&m);
    let cfg = EvalConfig::default();
    let at_p1 = StateDistribution::point(p.primary(1));
    let greedy = greedy_policy(&m, &ustar, 1.0);
    let rep = check_weak_p_eps_optimal(&m, &greedy, &at_p1, 0.01, &ustar, &cfg).unwrap();
    assert!(rep.passes);
    assert!(rep.aggregate_gap.abs() <= 1e-12);

    let never = blackwell_jump_at(&m, p, 6).unwrap();
    let rep = check_weak_p_eps_optimal(&m, &never, &at_p1, 1.0, &ustar, &cfg).unwrap();
    assert!(!rep.passes);
    assert_close(rep.aggregate_gap, 1.9375, 1e-12, "gap");
    assert_eq!(rep.witness, Some(p.primary(1)));

    let uniform = StateDistribution::uniform(&m, &p.primaries()).unwrap();
    let v = uniform.integrate(&ustar.values);
    for n0 in 1..=6 {
        let f = blackwell_jump_at(&m, p, n0).unwrap();
        assert!(check_weak_p_eps_optimal(&m, &f, &uniform, v + 0.1, &ustar, &cfg).unwrap().passes);
    }
}

#[test]
fn construction_examples() {
    let mut b = ModelBuilder::new(Regime::Positive);
    let x = b.add_state("x");
    let g = b.add_state("g");
    let bad = b.add_state("b");
    b.add_action(x, "gamble", [(g, 0.9, 1.0), (bad, 0.1, 0.0)]);
    b.add_action(g, "stay", [(g, 1.0, 0.0)]);
    b.add_action(bad, "stay", [(bad, 1.0, 0.0)]);
    let single = b.build();
    let (f, d) = construct_eps_optimal_stationary(&single, 0.05, None, 20).unwrap();
    assert_eq!(f.action(x), ActionId(0));
    assert!(d.succeeded);
    assert_eq!(d.achieved_ratio, 1.0);
    assert_eq!(d.schedule_steps, 1);

    // At β_k = 1 - 2^-k the greedy plan first jumps at p(k); with eps = 0.1
    // the schedule stops as soon as that is good enough, at k = 4.
    let (m, p) = blackwell(10, true);
    let (f, d) = construct_eps_optimal_stationary(&m, 0.1, None, 30).unwrap();
    assert_eq!(f, blackwell_jump_at(&m, p, 4).unwrap());
    assert_eq!((d.schedule_steps, d.beta_used), (4, 0.9375));
    assert!(d.achieved_ratio >= 0.9 && d.achieved_ratio < 1.0);
    // A tight enough eps forces the exact optimum of the truncation.
    let (f, d) = construct_eps_optimal_stationary(&m, 1e-4, None, 30).unwrap();
    assert_eq!(f, blackwell_jump_at(&m, p, 10).unwrap());
    assert_close(d.achieved_ratio, 1.0, 1e-12, "ratio");

    match construct_eps_optimal_stationary(&m, 1e-4, None, 3) {
        Err(Error::ScheduleExhausted { best }) => {
            assert!(!best.1.succeeded);
            assert_eq!(best.1.schedule_steps, 3);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        construct_eps_optimal_stationary(&m, 1.5, None, 3),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn construction_on_large_houses() {
    for (states, seed) in [(30, 42), (50, 7)] {
        let m = goal_reaching_house(HouseParams {
            states,
            gambles_per_state: 3,
            seed,
        })
        .unwrap();
        let ustar = optimum(&m);
        let (f, d) = construct_eps_optimal_stationary(&m, 0.05, None, 30).unwrap();
        assert!(d.achieved_ratio >= 0.95);
        let v = evaluate_stationary_linear(&m, &f, 1.0).unwrap_or_else(|_| {
            posdp::eval::evaluate(&m, &f.clone().into(), &EvalConfig::default()).unwrap()
        });
        for s in m.states() {
            assert!(v.get(s) >= 0.95 * ustar.get(s) - 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&ustar.get(s)));
        }
        let params = HouseParams {
            states,
            gambles_per_state: 3,
            seed,
        };
        assert_eq!(ustar.get(params.goal()), 0.0);
        assert_eq!(ustar.get(params.dead_end()), 0.0);
    }
}

#[test]
fn additive_check_on_the_signed_example() {
    let abc = ornstein_abc(AbcParams { max_gamble_index: 8 }).unwrap();
    let terminating_best = brute_force_optimal(&abc, 1.0, 5000, true).unwrap();
    assert_close(terminating_best.get(ABC_A), -1.0, 1e-9, "F(a)");
    for n in 2..=8 {
        let f = StationaryPolicy::from_fn(&abc, |s| if s == ABC_A { abc_gamble(n) } else { ActionId(0) }).unwrap();
        assert!(is_terminating(&abc, &f));
        let rep = check_additive_eps_optimal(&abc, &f, 0.5, &terminating_best).unwrap();
        assert!(rep.passes, "gamble {n}: {rep:?}");
    }

    let mut b = ModelBuilder::new(Regime::Signed);
    let x = b.add_state("x");
    let y = b.add_state("y");
    let z = b.add_state("z");
    b.add_action(x, "split", [(y, 0.5, -1.0), (z, 0.5, 0.0)]);
    b.add_action(y, "loop", [(z, 1.0, 0.0)]);
    b.add_action(z, "loop", [(y, 1.0, 0.0)]);
    let m = b.build();
    let f = StationaryPolicy::first_actions(&m);
    assert!(matches!(
        check_additive_eps_optimal(&m, &f, 0.5, &ValueFunction::zeros(3, 1.0)),
        Err(Error::NotTerminating { .. })
    ));

    let mut b = ModelBuilder::new(Regime::Signed);
    let x = b.add_state("x");
    let t = b.add_state("t");
    b.add_action(x, "go", [(t, 1.0, 0.0)]);
    b.add_action(x, "wait", [(x, 0.5, 0.0), (t, 0.5, 0.0)]);
    b.add_action(t, "stay", [(t, 1.0, 0.0)]);
    let zero = b.build();
    let best = brute_force_optimal(&zero, 1.0, 200, true).unwrap();
    for a in 0..2 {
        let f = StationaryPolicy::new(&zero, vec![ActionId(a), ActionId(0)]).unwrap();
        assert!(check_additive_eps_optimal(&zero, &f, 1e-6, &best).unwrap().passes);
    }
}

#[test]
fn oracle_examples() {
    let (m, p) = blackwell(4, true);
    let v = brute_force_optimal(&m, 1.0, 64, false).unwrap();
    assert_close(v.get(p.primary(1)), 1.875, 1e-12, "oracle p(1)");

    let h1 = brute_force_optimal(&m, 1.0, 1, false);
    // One stage cannot see the delayed payoff, so the routes disagree.
    assert!(matches!(h1, Err(Error::OracleMismatch { .. })));
    let one_step = random_positive_mdp(4, 2, 1.0, 3).unwrap();
    let v = brute_force_optimal(&one_step, 1.0, 1, false).unwrap();
    for s in one_step.states() {
        let best = (0..one_step.num_actions(s))
            .map(|a| one_step.expected_reward(s, ActionId(a)))
            .fold(0.0, f64::max);
        assert_close(v.get(s), best, 1e-12, "K^1 0");
    }

    let abc = ornstein_abc(AbcParams { max_gamble_index: 5 }).unwrap();
    let v = brute_force_optimal(&abc, 1.0, 2000, true).unwrap();
    assert_close(v.get(ABC_A), -1.0, 1e-9, "terminating F(a)");
    assert_close(v.get(state(&abc, "b")), -1.0, 1e-9, "terminating F(b)");

    let big = random_positive_mdp(20, 3, 0.1, 7).unwrap();
    assert!(matches!(
        brute_force_optimal(&big, 1.0, 100, false),
        Err(Error::TooLarge(_))
    ));
    let (u, _) = value_iterate(&big, 1.0, 1e-12, 1_000_000).unwrap();
    let rep = check_excessive(&big, &u, 1.0, 1e-11).unwrap();
    assert!(rep.passes);
}

#[test]
fn single_precision_agrees_with_double() {
    let p = BlackwellParams::lumped(8);
    let m32: F32Model = blackwell_counterexample(p).unwrap();
    let (u32, _) = value_iterate(&m32, 1.0f32, 1e-6, 100_000).unwrap();
    for n in 1..=8 {
        assert_close(u32.get(p.primary(n)) as f64, blackwell_optimum(n, 8), 1e-4, "f32 optimum");
    }
    let pi: Policy = blackwell_jump_at(&m32, p, 3).unwrap().into();
    let v: F32ValueFunction = posdp::eval::evaluate(&m32, &pi, &F32EvalConfig::default()).unwrap();
    assert_eq!(v.get(p.primary(3)), 7.0);

    let text = textio::serialize_model(&blackwell(8, true).0);
    let parsed = textio::parse_model::<f32>(&text).unwrap();
    assert_eq!(parsed, m32);
}
