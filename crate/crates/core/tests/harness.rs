//! End-to-end runs of the harness: regret accounting, the comparator, sweeps,
//! scaling on a toy instance and bit-identical replays.

mod common;

use rand::RngCore;

use ssp_lab::adversaries::{AdversarySource, History};
use ssp_lab::harness::{run_experiment, run_with_learners, sweep, write_regret_csv, ExperimentConfig, SweepConfig};
use ssp_lab::learners::{Algorithm, Execution, Feedback, Learner, LearnerConfig, LearnerError, Parameters, UpdateReport};
use ssp_lab::mdp::{best_fixed_policy_for_total, SspMdp, StationaryPolicy};
use ssp_lab::occupancy::occupancy_of_policy;
use ssp_lab::toy;

use common::{brute_force_best, mean_se, random_mdp};

fn source(mdp: &SspMdp, spec: &str) -> AdversarySource {
    AdversarySource::load(&spec.parse().unwrap(), mdp).unwrap()
}

fn oreps(episodes: usize, budget: f64) -> LearnerConfig {
    LearnerConfig::new(Algorithm::Oreps, episodes, Some(budget))
}

#[test]
fn zero_costs_give_zero_regret() {
    let mdp = toy::three_state();
    for alg in [Algorithm::Oreps, Algorithm::Adaptive, Algorithm::Skewed] {
        let mut learner = LearnerConfig::new(alg, 64, (alg != Algorithm::Adaptive).then_some(6.0));
        learner.h1 = Some(4);
        let report =
            run_experiment(&mdp, &source(&mdp, "constant:0"), &ExperimentConfig::new(learner, "constant:0", 3, 1)).unwrap();
        for t in &report.trials {
            assert_eq!(t.regret, 0.0, "{alg}");
            assert_eq!(t.learner_cost, 0.0);
        }
        assert_eq!(report.mean_regret, 0.0);
    }
}

/// Plays one fixed stationary policy forever.
struct FixedPolicy {
    policy: StationaryPolicy,
    params: Parameters,
}

impl Learner for FixedPolicy {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Oreps
    }

    fn execution(&mut self, _rng: &mut dyn RngCore) -> Execution<'_> {
        Execution::Stationary(&self.policy)
    }

    fn update(&mut self, _mdp: &SspMdp, _feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError> {
        Ok(UpdateReport::default())
    }

    fn pair_occupancy(&self) -> Vec<f64> {
        Vec::new()
    }

    fn parameters(&self) -> &Parameters {
        &self.params
    }
}

#[test]
fn oracle_learner_has_mean_zero_regret() {
    let mdp = toy::three_state();
    let cost = toy::three_state_costs(&mdp);
    let k = 50;
    let best = best_fixed_policy_for_total(&mdp, cost.as_slice(), 1).unwrap();
    let src = AdversarySource::Sequence { costs: vec![cost], cyclic: true };
    let config = ExperimentConfig::new(oreps(k, 6.0), "cycle:toy", 400, 2);
    let report = run_with_learners(&mdp, &src, &config, |_| {
        Ok(Box::new(FixedPolicy { policy: best.policy.clone(), params: Parameters::default() }) as Box<dyn Learner>)
    })
    .unwrap();
    for t in &report.trials {
        assert_eq!(t.comparator_actions, best.actions);
    }
    let regrets: Vec<f64> = report.trials.iter().map(|t| t.regret).collect();
    let (mean, se) = mean_se(&regrets);
    assert!(mean.abs() <= 4.0 * se, "oracle regret {mean} (SE {se})");
}

#[test]
fn regret_is_learner_minus_comparator_and_comparator_is_optimal() {
    for seed in 0..6u64 {
        let mdp = random_mdp(500 + seed, 2 + (seed as usize % 5), 3);
        let spec = format!("random:{seed}");
        let src = source(&mdp, &spec);
        let budget = ssp_lab::mdp::compute_fast_policy(&mdp).unwrap().initial_hitting_time(&mdp) + 4.0;
        let k = 40;
        let report = run_experiment(&mdp, &src, &ExperimentConfig::new(oreps(k, budget), spec.as_str(), 2, seed)).unwrap();
        assert!(report.failures.is_empty());
        for t in &report.trials {
            assert_eq!(t.regret, t.learner_cost - t.comparator_cost);
            assert_eq!(*t.cum_learner.last().unwrap(), t.learner_cost);
            assert!(t.cum_learner.windows(2).all(|w| w[1] >= w[0]));

            // Replay the realised costs and enumerate every deterministic policy.
            let mut adversary = src.instantiate(&mdp, t.trial).unwrap();
            let mut total = vec![0.0; mdp.num_pairs()];
            for e in 0..k {
                for (a, c) in total.iter_mut().zip(adversary.cost(e, &History::default()).unwrap().as_slice()) {
                    *a += c;
                }
            }
            let (_, brute) = brute_force_best(&mdp, &total);
            let policy = StationaryPolicy::deterministic(&mdp, &t.comparator_actions);
            let q = occupancy_of_policy(&mdp, &policy).unwrap();
            let value: f64 = q.iter().zip(&total).map(|(q, c)| q * c).sum();
            assert!((value - brute).abs() <= 1e-8 * brute.abs().max(1.0), "seed {seed}: {value} vs {brute}");
            assert!((t.comparator_cost - brute).abs() <= 1e-8 * brute.abs().max(1.0));
        }
    }
}

#[test]
fn oreps_regret_scales_like_root_k_on_alternating_costs() {
    let mdp = toy::three_state();
    let src = source(&mdp, "alternating:1");
    let ratios: Vec<f64> = [1024usize, 4096, 16384]
        .iter()
        .map(|&k| {
            let report =
                run_experiment(&mdp, &src, &ExperimentConfig::new(oreps(k, 8.0), "alternating:1", 20, 0)).unwrap();
            report.mean_regret / (k as f64).sqrt()
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!((r / mean - 1.0).abs() <= 0.2, "R/√K ratios {ratios:?} vary by more than 20%");
    }
}

#[test]
fn single_cell_sweep_matches_run_experiment() {
    let mdp = toy::three_state();
    let src = source(&mdp, "random:4");
    let base = ExperimentConfig::new(oreps(128, 6.0), "random:4", 3, 8);
    let direct = run_experiment(&mdp, &src, &base).unwrap();
    let grid =
        SweepConfig { base: base.clone(), algorithms: vec![Algorithm::Oreps], episodes: vec![128], seeds: vec![8] };
    let swept = sweep(&mdp, &src, &grid).unwrap();
    assert_eq!(swept.cells.len(), 1);
    assert_eq!(swept.cells[0].report.trials, direct.trials);
    assert_eq!(swept.cells[0].report.mean_regret, direct.mean_regret);
}

#[test]
fn sweep_over_k_has_nondecreasing_cumulative_cost() {
    let mdp = toy::three_state();
    let src = source(&mdp, "random:6");
    let grid = SweepConfig {
        base: ExperimentConfig::new(oreps(1, 6.0), "random:6", 3, 0),
        algorithms: vec![Algorithm::Oreps, Algorithm::Adaptive],
        episodes: vec![16, 64, 256],
        seeds: vec![0, 1],
    };
    let report = sweep(&mdp, &src, &grid).unwrap();
    assert_eq!(report.cells.len(), 2 * 3 * 2);
    for alg in [Algorithm::Oreps, Algorithm::Adaptive] {
        let costs: Vec<f64> = grid
            .episodes
            .iter()
            .map(|&k| {
                let cells: Vec<_> = report.cells.iter().filter(|c| c.algorithm == alg && c.episodes == k).collect();
                cells.iter().map(|c| c.report.mean_learner_cost).sum::<f64>() / cells.len() as f64
            })
            .collect();
        assert!(costs.windows(2).all(|w| w[1] >= w[0]), "{alg}: {costs:?}");
        let fit = report.slopes.iter().find(|s| s.algorithm == alg).unwrap();
        assert_eq!(fit.points.len(), 3);
    }
}

#[test]
fn reports_are_bit_identical_across_thread_counts() {
    let mdp = toy::three_state();
    let src = source(&mdp, "random:12");
    let mut learner = LearnerConfig::new(Algorithm::Skewed, 64, Some(6.0));
    learner.h1 = Some(4);
    let csv = |jobs: usize| {
        let mut config = ExperimentConfig::new(learner.clone(), "random:12", 4, 77);
        config.jobs = Some(jobs);
        let report = run_experiment(&mdp, &src, &config).unwrap();
        let mut bytes = Vec::new();
        write_regret_csv(&report, &mut bytes).unwrap();
        (bytes, serde_json::to_string(&report.trials).unwrap())
    };
    let (a_csv, a_json) = csv(1);
    let (b_csv, b_json) = csv(3);
    let (c_csv, _) = csv(1);
    assert_eq!(a_csv, b_csv);
    assert_eq!(a_json, b_json);
    assert_eq!(a_csv, c_csv);
}

#[test]
fn failing_trials_are_recorded_without_aborting_the_run() {
    // With its default constants on a tiny K the high-probability bandit
    // learner's bias coefficient dwarfs every cost, and its steps fail.
    let mdp = toy::three_state();
    let src = source(&mdp, "random:1");
    let mut learner = LearnerConfig::new(Algorithm::BanditHp, 64, Some(8.0));
    learner.h1 = Some(4);
    let report = run_experiment(&mdp, &src, &ExperimentConfig::new(learner, "random:1", 2, 0)).unwrap();
    assert_eq!(report.trials.len() + report.failures.len(), 2);
    assert!(!report.failures.is_empty());
    assert!(report.failures.iter().all(|f| f.solver_failure));
}
