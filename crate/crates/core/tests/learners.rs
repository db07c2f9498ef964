//! Behaviour of the five learners when driven through the episode protocol:
//! feasibility of every iterate, degenerate configurations, the multi-scale
//! meta-learner and the rate schedule of the high-probability bandit learner.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssp_lab::adversaries::reveal_bandit;
use ssp_lab::harness::{run_experiment, ExperimentConfig};
use ssp_lab::learners::{
    build_learner, Adaptive, Algorithm, AuditSchedule, Execution, Feedback, Learner, LearnerConfig, LearnerError,
    LogBarrierLearner, MultiScaleExperts, Oreps, Parameters, UpdateReport,
};
use ssp_lab::mdp::{compute_fast_policy, simulate_episode, CostFunction, SimulationOptions, SspMdp};
use ssp_lab::occupancy::simulate_layered;
use ssp_lab::toy;

use common::random_costs;

/// γ small enough that `γ·H ≤ 1` on the toy at the horizons used here.
const SAFE_GAMMA: f64 = 0.005;

fn config(algorithm: Algorithm, episodes: usize, budget: Option<f64>) -> LearnerConfig {
    let mut c = LearnerConfig::new(algorithm, episodes, budget);
    if algorithm == Algorithm::BanditHp {
        c.overrides.gamma = Some(SAFE_GAMMA);
    }
    c
}

fn cost_stream(mdp: &SspMdp, episodes: usize, seed: u64) -> Vec<CostFunction> {
    (0..episodes as u64).map(|k| CostFunction::new(random_costs(seed ^ (k << 20), mdp.num_pairs())).unwrap()).collect()
}

/// Runs one episode of the protocol for `learner` on `cost` and returns the
/// update report.
fn play(
    mdp: &SspMdp,
    learner: &mut dyn Learner,
    cost: &CostFunction,
    env: &mut ChaCha8Rng,
    own: &mut ChaCha8Rng,
) -> Result<UpdateReport, LearnerError> {
    let options = SimulationOptions::default();
    let mode = learner.algorithm().feedback();
    let (trace, counts) = match learner.execution(own) {
        Execution::Stationary(p) => (simulate_episode(mdp, p, Some(cost), env, options), None),
        Execution::Layered { loop_free, policy, fast } => {
            let (t, c) = simulate_layered(mdp, loop_free, policy, fast, Some(cost), env, options);
            (t, Some(c))
        }
    };
    match mode {
        ssp_lab::learners::FeedbackMode::Full => learner.update(mdp, Feedback::Full { cost, counts: counts.as_ref() }),
        ssp_lab::learners::FeedbackMode::Bandit => {
            let feedback = reveal_bandit(cost, &trace, counts.expect("bandit learners run layered policies"));
            learner.update(mdp, Feedback::Bandit(&feedback))
        }
    }
}

#[test]
fn every_learner_keeps_feasible_audited_iterates() {
    let mdp = toy::three_state();
    let source = ssp_lab::adversaries::AdversarySource::load(&"random:7".parse().unwrap(), &mdp).unwrap();
    for alg in Algorithm::ALL {
        let mut learner = config(alg, 64, (alg != Algorithm::Adaptive).then_some(6.0));
        learner.h1 = Some(4);
        learner.audit = AuditSchedule { samples: 200, period: 16, seed: 3 };
        let report = run_experiment(&mdp, &source, &ExperimentConfig::new(learner, "random:7", 2, 11)).unwrap();
        assert!(report.failures.is_empty(), "{alg}: {:?}", report.failures);
        let d = report.diagnostics;
        assert!(d.max_feasibility_residual <= 1e-6, "{alg}: feasibility {}", d.max_feasibility_residual);
        assert!(d.max_kkt_residual <= 1e-8, "{alg}: KKT {}", d.max_kkt_residual);
        assert!(d.audits > 0, "{alg}: no audit ran");
        assert!(d.worst_audit_gap <= 1e-9, "{alg}: a random feasible point beat the step ({})", d.worst_audit_gap);
    }
}

#[test]
fn adaptive_with_one_expert_replays_oreps_at_the_first_scale() {
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    // Fast hitting time ≈ 2.09, so j0 = 1 and N = ⌈log2 4⌉ − 1 = 1 with b(1) = 4.
    let k = 4;
    let adaptive_cfg = LearnerConfig::new(Algorithm::Adaptive, k, None);
    let params = Parameters::derive(&mdp, &fast, &adaptive_cfg).unwrap();
    assert_eq!(params.experts, 1);
    assert_eq!(params.scales, vec![4.0]);
    let mut adaptive = build_learner(&mdp, &fast, &adaptive_cfg).unwrap();
    let mut oreps = build_learner(&mdp, &fast, &LearnerConfig::new(Algorithm::Oreps, k, Some(4.0))).unwrap();
    let (mut env_a, mut env_b) = (ChaCha8Rng::seed_from_u64(5), ChaCha8Rng::seed_from_u64(5));
    let (mut own_a, mut own_b) = (ChaCha8Rng::seed_from_u64(6), ChaCha8Rng::seed_from_u64(6));
    for cost in cost_stream(&mdp, k, 9) {
        let pa = match adaptive.execution(&mut own_a) {
            Execution::Stationary(p) => p.clone(),
            _ => unreachable!("adaptive plays stationary policies"),
        };
        let pb = match oreps.execution(&mut own_b) {
            Execution::Stationary(p) => p.clone(),
            _ => unreachable!("oreps plays stationary policies"),
        };
        assert_eq!(pa.as_slice(), pb.as_slice());
        play(&mdp, adaptive.as_mut(), &cost, &mut env_a, &mut own_a).unwrap();
        play(&mdp, oreps.as_mut(), &cost, &mut env_b, &mut own_b).unwrap();
        assert_eq!(adaptive.pair_occupancy(), oreps.pair_occupancy());
    }
}

#[test]
fn single_episode_plays_the_initial_policy() {
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    let cfg = LearnerConfig::new(Algorithm::Oreps, 1, Some(5.0));
    let oreps = Oreps::new(&mdp, &fast, Parameters::derive(&mdp, &fast, &cfg).unwrap(), AuditSchedule::default()).unwrap();
    let expected = ssp_lab::occupancy::policy_of_occupancy(&mdp, &oreps.occupancy());
    assert_eq!(oreps.policy().as_slice(), expected.as_slice());
    let q = oreps.occupancy();
    assert!(ssp_lab::occupancy::membership_residual(&mdp, &q, 5.0) <= 1e-8);
}

#[test]
fn zero_costs_leave_flat_iterates_unchanged() {
    // The layered learners are excluded: their lifted cost charges the fast
    // state 1 per step, so a zero cost on the original pairs still moves them.
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    let zero = CostFunction::zeros(mdp.num_pairs());
    for cfg in [LearnerConfig::new(Algorithm::Oreps, 256, Some(6.0)), LearnerConfig::new(Algorithm::Adaptive, 256, None)] {
        let mut learner = build_learner(&mdp, &fast, &cfg).unwrap();
        let start = learner.pair_occupancy();
        let (mut env, mut own) = (ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(2));
        for _ in 0..20 {
            play(&mdp, learner.as_mut(), &zero, &mut env, &mut own).unwrap();
        }
        for (a, b) in start.iter().zip(learner.pair_occupancy()) {
            assert!((a - b).abs() <= 1e-8, "{}: {a} drifted to {b}", cfg.algorithm);
        }
    }
}

#[test]
fn expert_losses_never_exceed_their_scale() {
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    let k = 256;
    let cfg = LearnerConfig::new(Algorithm::Adaptive, k, None);
    let mut adaptive = Adaptive::new(&mdp, &fast, Parameters::derive(&mdp, &fast, &cfg).unwrap(), AuditSchedule::default()).unwrap();
    assert!(adaptive.experts().len() > 1);
    let (mut env, mut own) = (ChaCha8Rng::seed_from_u64(3), ChaCha8Rng::seed_from_u64(4));
    for cost in cost_stream(&mdp, k, 21) {
        for (inst, b) in adaptive.instances().iter().zip(adaptive.experts().scales()) {
            let loss = inst.expected_cost(&cost);
            assert!(loss <= b + 1e-8, "expert loss {loss} exceeds its scale {b}");
        }
        play(&mdp, &mut adaptive, &cost, &mut env, &mut own).unwrap();
        let p = adaptive.experts().probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn meta_learner_tracks_the_better_of_two_experts() {
    // Two experts with scales 4 and 8; expert 2's per-round loss is half of
    // expert 1's, so it is the benchmark.
    let k = 5000;
    let scales = vec![4.0, 8.0];
    let rates: Vec<f64> = scales.iter().map(|b: &f64| 1.0 / (b * k as f64 * 16.0).sqrt()).collect();
    let mut experts = MultiScaleExperts::from_parts(1, scales, rates);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut meta, mut best) = (0.0, 0.0);
    for _ in 0..k {
        let l1 = 4.0 * rand::Rng::gen::<f64>(&mut rng);
        let losses = [l1, 0.5 * l1];
        meta += experts.probabilities().iter().zip(&losses).map(|(p, l)| p * l).sum::<f64>();
        best += losses[1];
        experts.update(&losses);
    }
    let bound = experts.regret_bound(1, best);
    assert!(meta - best <= bound, "meta regret {} exceeds {bound}", meta - best);
}

#[test]
fn high_probability_rates_follow_their_schedule() {
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    let k = 256;
    let mut cfg = config(Algorithm::BanditHp, k, Some(6.0));
    cfg.h1 = Some(4);
    let params = Parameters::derive(&mdp, &fast, &cfg).unwrap();
    assert!(params.gamma * (params.h1 + params.h2) as f64 <= 1.0);
    let (eta, beta) = (params.eta, params.beta);
    let mut learner = LogBarrierLearner::new(&mdp, &fast, params, AuditSchedule::default()).unwrap();
    let (mut env, mut own) = (ChaCha8Rng::seed_from_u64(8), ChaCha8Rng::seed_from_u64(9));
    let mut thresholds = learner.thresholds().to_vec();
    let mut total_increases = 0;
    for cost in cost_stream(&mdp, k, 33) {
        let report = play(&mdp, &mut learner, &cost, &mut env, &mut own).unwrap();
        assert!(report.min_fed_loss >= 0.0, "fed loss went negative: {}", report.min_fed_loss);
        total_increases += report.rate_increases;
        for (g, ((rate, n), rho)) in learner.rates().iter().zip(learner.rate_increases()).zip(learner.thresholds()).enumerate() {
            assert!((rate - eta * beta.powi(*n as i32)).abs() <= 1e-12 * rate, "pair group {g}: rate {rate} after {n} increases");
            assert!(*rate >= eta && *rate <= 5.0 * eta);
            assert!(*n as f64 <= 7.0 * (k as f64).log2());
            assert!(*rho >= thresholds[g], "threshold of group {g} decreased");
        }
        thresholds = learner.thresholds().to_vec();
    }
    assert!(total_increases > 0, "the schedule never fired; the test exercises nothing");
}

#[test]
fn learners_reject_the_wrong_feedback_mode() {
    let mdp = toy::three_state();
    let fast = compute_fast_policy(&mdp).unwrap();
    let cost = toy::three_state_costs(&mdp);
    let mut cfg = LearnerConfig::new(Algorithm::Bandit, 16, Some(6.0));
    cfg.h1 = Some(4);
    let mut bandit = build_learner(&mdp, &fast, &cfg).unwrap();
    let err = bandit.update(&mdp, Feedback::Full { cost: &cost, counts: None }).unwrap_err();
    assert!(matches!(err, LearnerError::Feedback(_)));
}
