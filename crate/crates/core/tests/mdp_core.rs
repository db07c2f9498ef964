//! Exact evaluation, planning and simulation on small hand-checked
//! instances.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssp_lab::adversaries::{build_lower_bound, LowerBoundMode, LowerBoundParams};
use ssp_lab::mdp::{
    best_fixed_policy, compute_cost_to_go, compute_fast_policy, compute_hitting_times, simulate_episode, CostFunction,
    SimulationOptions, StationaryPolicy,
};
use ssp_lab::toy;

use common::{brute_force_best, build, mean_se};

fn lower_bound(d: usize, t: usize) -> ssp_lab::adversaries::LowerBound {
    build_lower_bound(LowerBoundParams { diameter: d, t_star: t, episodes: 4096, mode: LowerBoundMode::Full, branches: 3, seed: 5 })
        .unwrap()
}

#[test]
fn forced_single_step_takes_one_step() {
    let m = build(&[("s0", &[("a", &[("g", 1.0)])])]);
    let pi = StationaryPolicy::uniform(&m);
    assert_eq!(compute_hitting_times(&m, &pi).unwrap(), vec![1.0]);
    let fast = compute_fast_policy(&m).unwrap();
    assert_eq!(fast.diameter, 1.0);
}

#[test]
fn geometric_exit_has_reciprocal_hitting_time_and_cost() {
    let m = build(&[("s0", &[("a", &[("s0", 0.75), ("g", 0.25)])])]);
    let pi = StationaryPolicy::uniform(&m);
    assert!((compute_hitting_times(&m, &pi).unwrap()[0] - 4.0).abs() < 1e-12);
    assert!((compute_cost_to_go(&m, &pi, &[1.0]).unwrap()[0] - 4.0).abs() < 1e-12);
    assert_eq!(compute_cost_to_go(&m, &pi, &[0.0]).unwrap(), vec![0.0]);

    // Monte-Carlo mean number of steps within three standard errors.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let steps: Vec<f64> =
        (0..100_000).map(|_| simulate_episode(&m, &pi, None, &mut rng, SimulationOptions::default()).steps as f64).collect();
    let (mean, se) = mean_se(&steps);
    assert!((mean - 4.0).abs() <= 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn deterministic_chain_visits_each_pair_once() {
    let m = build(&[
        ("s0", &[("a", &[("s1", 1.0)])]),
        ("s1", &[("a", &[("s2", 1.0)])]),
        ("s2", &[("a", &[("g", 1.0)])]),
    ]);
    let pi = StationaryPolicy::uniform(&m);
    let cost = CostFunction::new(vec![0.5, 0.25, 1.0]).unwrap();
    let trace = simulate_episode(&m, &pi, Some(&cost), &mut ChaCha8Rng::seed_from_u64(0), SimulationOptions::default());
    assert_eq!(trace.steps, 3);
    assert_eq!(trace.visits, vec![1, 1, 1]);
    assert_eq!(trace.cost, 1.75);
}

#[test]
fn dominant_action_is_the_fast_policy() {
    let m = build(&[
        ("s0", &[("a1", &[("s0", 0.5), ("g", 0.5)]), ("a2", &[("g", 1.0)])]),
        ("s1", &[("a1", &[("s1", 0.5), ("g", 0.5)]), ("a2", &[("g", 1.0)])]),
    ]);
    let fast = compute_fast_policy(&m).unwrap();
    assert_eq!(fast.actions, vec![1, 1]);
    assert_eq!(fast.diameter, 1.0);
}

#[test]
fn lower_bound_escape_state_takes_d_steps() {
    let lb = lower_bound(8, 32);
    let f = lb.mdp.state_by_name("f").unwrap();
    let fast = compute_fast_policy(&lb.mdp).unwrap();
    let t = compute_hitting_times(&lb.mdp, &fast.policy).unwrap();
    assert!((t[f.0] - 8.0).abs() < 1e-9);
    assert!((fast.diameter - 10.0).abs() < 1e-6);
}

#[test]
fn good_branch_expected_cost_is_half_the_diameter() {
    for (d, t) in [(4, 8), (8, 32)] {
        let lb = lower_bound(d, t);
        let mean = lb.law.mean_cost();
        let j = compute_cost_to_go(&lb.mdp, &lb.branch_policy(lb.law.good_index), &mean).unwrap()[0];
        assert!((j - d as f64 / 2.0).abs() < 1e-9, "J = {j}");
    }
}

#[test]
fn lower_bound_comparator_is_the_good_branch() {
    let lb = lower_bound(8, 32);
    let mean = CostFunction::new(lb.law.mean_cost()).unwrap();
    let best = best_fixed_policy(&lb.mdp, &[mean]).unwrap();
    assert_eq!(best.actions[0], lb.law.good_index - 1);
    assert!((best.hitting_time - 33.0).abs() < 1e-6);
}

#[test]
fn single_proper_policy_is_the_comparator() {
    let m = build(&[("s0", &[("a", &[("s0", 0.5), ("g", 0.5)])])]);
    let c = CostFunction::new(vec![0.3]).unwrap();
    let best = best_fixed_policy(&m, &[c]).unwrap();
    assert_eq!(best.actions, vec![0]);
    assert!((best.total_cost - 0.6).abs() < 1e-12);
}

#[test]
fn toy_comparator_matches_enumeration() {
    let m = toy::three_state();
    let costs: Vec<CostFunction> = (0..5).map(|k| CostFunction::new(common::random_costs(k, m.num_pairs())).unwrap()).collect();
    let mut total = vec![0.0; m.num_pairs()];
    for c in &costs {
        total.iter_mut().zip(c.as_slice()).for_each(|(t, v)| *t += v);
    }
    let best = best_fixed_policy(&m, &costs).unwrap();
    let (actions, value) = brute_force_best(&m, &total);
    assert!(best.actions == actions || (best.total_cost - value).abs() < 1e-8);
    assert!((best.total_cost - value).abs() < 1e-8);
}
