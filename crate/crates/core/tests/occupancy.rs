//! Occupancy measures, the layered reduction and its execution rule.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssp_lab::learners::second_stage_horizon;
use ssp_lab::mdp::{compute_fast_policy, simulate_episode, CostFunction, SimulationOptions, StationaryPolicy};
use ssp_lab::occupancy::{
    flow_residual, membership_residual, occupancy_of_policy, policy_of_occupancy, simulate_layered, skew, unskew, LoopFree,
};
use ssp_lab::toy;

use common::{build, random_mdp, random_policy};

#[test]
fn chain_and_geometric_occupancies() {
    let chain = build(&[("s0", &[("a", &[("g", 1.0)])])]);
    assert_eq!(occupancy_of_policy(&chain, &StationaryPolicy::uniform(&chain)).unwrap(), vec![1.0]);
    let geo = build(&[("s0", &[("a", &[("s0", 0.75), ("g", 0.25)])])]);
    let q = occupancy_of_policy(&geo, &StationaryPolicy::uniform(&geo)).unwrap();
    assert!((q[0] - 4.0).abs() < 1e-12);
}

#[test]
fn random_instance_occupancy_matches_visit_means() {
    let m = random_mdp(11, 5, 3);
    let pi = random_policy(&m, 12);
    let q = occupancy_of_policy(&m, &pi).unwrap();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut sum = vec![0.0; m.num_pairs()];
    let mut sum_sq = vec![0.0; m.num_pairs()];
    for _ in 0..n {
        let t = simulate_episode(&m, &pi, None, &mut rng, SimulationOptions::default());
        for (p, v) in t.visits.iter().enumerate() {
            sum[p] += *v as f64;
            sum_sq[p] += (*v as f64).powi(2);
        }
    }
    for p in 0..m.num_pairs() {
        let mean = sum[p] / n as f64;
        let se = ((sum_sq[p] / n as f64 - mean * mean).max(0.0) / (n as f64 - 1.0)).sqrt();
        assert!((mean - q[p]).abs() <= 4.0 * se + 1e-12, "pair {p}: {mean} vs {}", q[p]);
    }
}

#[test]
fn policy_recovery_from_occupancy() {
    let m = build(&[("s0", &[("a1", &[("g", 1.0)]), ("a2", &[("g", 1.0)])]), ("s1", &[("a1", &[("g", 1.0)]), ("a2", &[("g", 1.0)])])]);
    let pi = policy_of_occupancy(&m, &[3.0, 1.0, 0.0, 0.0]);
    assert_eq!(pi.as_slice(), &[0.75, 0.25, 0.5, 0.5]);

    // Round trip at every state with positive visit mass.
    let r = random_mdp(3, 5, 3);
    let pi = random_policy(&r, 4);
    let back = policy_of_occupancy(&r, &occupancy_of_policy(&r, &pi).unwrap());
    for (a, b) in back.as_slice().iter().zip(pi.as_slice()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn membership_residual_is_linear_in_scaling() {
    let m = toy::three_state();
    let q = occupancy_of_policy(&m, &StationaryPolicy::uniform(&m)).unwrap();
    let total: f64 = q.iter().sum();
    assert!(membership_residual(&m, &q, total + 1e-8) < 1e-8);
    let scaled: Vec<f64> = q.iter().map(|v| 1.1 * v).collect();
    assert!((flow_residual(&m, &scaled) - 0.1).abs() < 1e-9);
    assert!((flow_residual(&m, &vec![0.0; q.len()]) - 1.0).abs() < 1e-15);
}

#[test]
fn second_stage_horizon_formula() {
    // ⌈16 · ln 40000⌉ = ⌈169.55…⌉.
    assert_eq!(second_stage_horizon(4.0, 1000, 0.1), (16.0 * 40_000f64.ln()).ceil() as usize);
    assert_eq!(second_stage_horizon(4.0, 1000, 0.1), 170);
}

#[test]
fn single_state_reduction_has_three_layered_states() {
    let m = build(&[("s0", &[("a", &[("s0", 0.5), ("g", 0.5)])])]);
    let lf = LoopFree::new(&m, 2, 1).unwrap();
    let s0 = m.initial();
    assert!(lf.is_reachable(s0, 1) && lf.is_reachable(s0, 2));
    assert_eq!(lf.num_layer_vars(), 2);
    assert!(lf.fast_var().is_some());
    assert_eq!(lf.horizon(), 3);
    // Lifted cost: c on layer variables, 1 on the fast chain.
    let c = lf.lifted_cost(&CostFunction::new(vec![0.25]).unwrap());
    assert_eq!(c, vec![0.25, 0.25, 1.0]);
}

#[test]
fn sigma_execution_records_layer_and_fast_indicators() {
    let chain = |n: usize| {
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let rows: Vec<(String, String)> =
            (0..n).map(|i| (names[i].clone(), if i + 1 < n { names[i + 1].clone() } else { "g".into() })).collect();
        let json = format!(
            r#"{{"states":{states:?},"initial":"s0","goal":"g","actions":{{{acts}}},"transitions":{{{trans}}}}}"#,
            states = names,
            acts = names.iter().map(|s| format!(r#""{s}":["a"]"#)).collect::<Vec<_>>().join(","),
            trans = rows.iter().map(|(s, t)| format!(r#""{s}":{{"a":[["{t}",1.0]]}}"#)).collect::<Vec<_>>().join(","),
        );
        ssp_lab::mdp::SspMdp::from_json_str(&json, ssp_lab::mdp::Validation::Strict).unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    // Episode of two steps with H1 = 4: two layer indicators, no fast visit.
    let m = chain(2);
    let fast = compute_fast_policy(&m).unwrap();
    let lf = LoopFree::new(&m, 4, 3).unwrap();
    let (trace, counts) = simulate_layered(&m, &lf, &lf.uniform(&m), &fast.policy, None, &mut rng, SimulationOptions::default());
    assert_eq!(trace.steps, 2);
    assert_eq!(counts.0.iter().filter(|v| **v == 1.0).count(), 2);
    assert_eq!(lf.fast_var().map(|f| counts.0[f]).unwrap_or(0.0), 0.0);

    // Five steps with H1 = 3: three layer indicators and the fast indicator,
    // which stands for one visit on each of the H2 fast layers.
    let m = chain(5);
    let fast = compute_fast_policy(&m).unwrap();
    let lf = LoopFree::new(&m, 3, 7).unwrap();
    let (trace, counts) = simulate_layered(&m, &lf, &lf.uniform(&m), &fast.policy, None, &mut rng, SimulationOptions::default());
    assert_eq!(trace.steps, 5);
    let f = lf.fast_var().unwrap();
    assert_eq!(counts.0[f], 1.0);
    assert_eq!(counts.0.iter().enumerate().filter(|(i, v)| *i != f && **v == 1.0).count(), 3);
    assert_eq!(*lf.aggregate(&counts.0).last().unwrap(), 7.0);
}

#[test]
fn skew_of_a_third_layer_coordinate() {
    let m = build(&[("s0", &[("a", &[("s0", 0.5), ("g", 0.5)])])]);
    let lf = LoopFree::new(&m, 3, 2).unwrap();
    let i = lf.var(m.pair(m.initial(), 0), 3).unwrap();
    let w = lf.skew_weights(0.5);
    let mut q = vec![0.0; lf.num_vars()];
    q[i] = 2.0;
    assert_eq!(skew(&q, &w)[i], 5.0);
    assert_eq!(skew(&q, &lf.skew_weights(0.0)), q);
    assert_eq!(unskew(&skew(&q, &w), &w), q);
}

#[test]
fn lifted_optimal_policy_respects_the_hitting_bound() {
    // With H1 ≥ 8 τ ln K the lifted fast policy has total layered mass at
    // most T_* + 1 (here the fast policy is also the comparator).
    let m = toy::three_state();
    let fast = compute_fast_policy(&m).unwrap();
    let k = 16usize;
    let tau = fast.diameter;
    let h1 = (8.0 * tau * (k as f64).ln()).ceil() as usize;
    let lf = LoopFree::new(&m, h1, second_stage_horizon(fast.diameter, k, 0.1)).unwrap();
    let q = lf.occupancy_of(&m, &lf.lift(&fast.policy));
    let mass: f64 = lf.mass_weights().iter().zip(&q).map(|(w, x)| w * x).sum();
    let t_star = fast.initial_hitting_time(&m);
    assert!(mass <= t_star + 1.0 + 1e-6, "mass {mass} vs T* + 1 = {}", t_star + 1.0);
}
