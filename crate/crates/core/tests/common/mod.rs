//! Shared helpers for the integration tests: seeded random instances and a
//! brute-force comparator oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssp_lab::mdp::{compute_cost_to_go, compute_hitting_times, MdpDocument, SspMdp, StationaryPolicy, Validation};

/// A random SSP with `states` states and 1..=`max_actions` actions each.
///
/// Action `a0` of every state reaches the goal with probability at least
/// 0.2, so the instance always has a proper policy; other actions may loop
/// forever, so some deterministic policies are improper.
pub fn random_mdp(seed: u64, states: usize, max_actions: usize) -> SspMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..states).map(|i| format!("s{i}")).collect();
    let mut actions = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for s in &names {
        let n = rng.gen_range(1..=max_actions);
        let acts: Vec<String> = (0..n).map(|a| format!("a{a}")).collect();
        let mut rows = BTreeMap::new();
        for (a, name) in acts.iter().enumerate() {
            let goal = if a == 0 { rng.gen_range(0.2..0.9) } else if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.05..0.9) };
            let mut row: Vec<(String, f64)> = Vec::new();
            if goal > 0.0 {
                row.push(("g".into(), goal));
            }
            let k = rng.gen_range(1..=2.min(states));
            let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w *= (1.0 - goal) / total);
            for w in weights {
                let target = names[rng.gen_range(0..states)].clone();
                match row.iter_mut().find(|(t, _)| *t == target) {
                    Some(entry) => entry.1 += w,
                    None => row.push((target, w)),
                }
            }
            rows.insert(name.clone(), row);
        }
        actions.insert(s.clone(), acts);
        transitions.insert(s.clone(), rows);
    }
    let doc = MdpDocument { states: names.clone(), initial: names[0].clone(), goal: "g".into(), actions, transitions };
    SspMdp::from_document(&doc, Validation::Strict).expect("generated instance is valid")
}

/// A uniformly random cost vector in `[0,1]`.
pub fn random_costs(seed: u64, pairs: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs).map(|_| rng.gen()).collect()
}

/// A random stochastic policy with full support (hence proper whenever the
/// instance can reach the goal from every state).
pub fn random_policy(mdp: &SspMdp, seed: u64) -> StationaryPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..mdp.num_pairs()).map(|_| rng.gen_range(0.05..1.0)).collect();
    StationaryPolicy::from_pair_weights(mdp, &weights)
}

/// Best proper deterministic policy by exhaustive enumeration:
/// `(actions, total cost at s0)`.
pub fn brute_force_best(mdp: &SspMdp, total_cost: &[f64]) -> (Vec<usize>, f64) {
    let counts: Vec<usize> = mdp.states().map(|s| mdp.num_actions(s)).collect();
    let mut actions = vec![0usize; counts.len()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let policy = StationaryPolicy::deterministic(mdp, &actions);
        if compute_hitting_times(mdp, &policy).is_ok() {
            let v = compute_cost_to_go(mdp, &policy, total_cost).unwrap()[mdp.initial().0];
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((actions.clone(), v));
            }
        }
        // Odometer increment over the action counts.
        let mut i = 0;
        loop {
            if i == actions.len() {
                return best.expect("some deterministic policy is proper");
            }
            actions[i] += 1;
            if actions[i] < counts[i] {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
    }
}

/// A tiny SSP built from `(state, [(action, [(successor, prob)])])` rows.
pub fn build(rows: &[(&str, &[(&str, &[(&str, f64)])])]) -> SspMdp {
    let states: Vec<String> = rows.iter().map(|(s, _)| s.to_string()).collect();
    let mut actions = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for (s, acts) in rows {
        actions.insert(s.to_string(), acts.iter().map(|(a, _)| a.to_string()).collect());
        transitions.insert(
            s.to_string(),
            acts.iter().map(|(a, row)| (a.to_string(), row.iter().map(|(t, p)| (t.to_string(), *p)).collect())).collect(),
        );
    }
    let doc = MdpDocument { states: states.clone(), initial: states[0].clone(), goal: "g".into(), actions, transitions };
    SspMdp::from_document(&doc, Validation::Strict).expect("hand-built instance is valid")
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
