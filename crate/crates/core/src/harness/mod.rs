//! Experiment harness: runs learners against adversaries for `K` episodes
//! over seeded trials, accounts regret against the best fixed policy in
//! hindsight, and runs the Monte-Carlo property suite.
//!
//! Random streams: trial `t` of an experiment with seed `s` owns the ChaCha8
//! stream `(s, t)`; its first two outputs seed the environment (transition
//! sampling) and the learner (policy sampling) generators. Adversaries draw
//! from their own `(seed, trial, episode)` streams. Trials share only the
//! immutable MDP and are merged by trial index, so reports are bit-identical
//! for identical configurations regardless of the number of worker threads.

mod properties;
mod report;
mod sweep;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversaries::{reveal_bandit, reveal_full, AdversaryError, AdversarySource, History};
use crate::learners::{build_learner, Execution, Feedback, FeedbackMode, Learner, LearnerConfig, LearnerError, Parameters};
use crate::mdp::{
    best_fixed_policy_for_total, compute_fast_policy, simulate_episode, CostFunction, MdpError, SimulationOptions, SspMdp,
    DEFAULT_STEP_CAP,
};
use crate::occupancy::{occupancy_of_policy, simulate_layered};
use crate::omd::OmdError;

pub use properties::{
    check_bandit_estimators, check_hitting_tail, check_layered_variance, check_layered_visits, check_occupancy_identities,
    check_row_stochastic, check_squared_estimate_bound, check_stationary_variance, check_visit_means,
    property_suite, LayeredSetup, PropertyCheck, PropertyLedger, PropertyOptions, LOW_POWER_SAMPLES,
};
pub use report::{fit_loglog_slope, write_regret_csv, DiagnosticsSummary, ExperimentSummary, RegretReport, TrialFailure, TrialReport};
pub use sweep::{sweep, SlopeFit, SweepCell, SweepConfig, SweepReport};

/// Errors raised by the harness.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the error is a numerical failure of a mirror-descent step
    /// (an infeasible floor or a solver that did not converge).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            HarnessError::Learner(LearnerError::Solver(OmdError::InfeasibleFloor(_) | OmdError::SolverFailure { .. }))
        )
    }
}

/// One experiment: a learner configuration, an adversary and a trial count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub learner: LearnerConfig,
    /// Adversary specification string (see [`crate::adversaries::AdversarySpec`]).
    pub adversary: String,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads for trials (`None`: one per core).
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_step_cap")]
    pub step_cap: u64,
}

fn default_step_cap() -> u64 {
    DEFAULT_STEP_CAP
}

impl ExperimentConfig {
    pub fn new(learner: LearnerConfig, adversary: impl Into<String>, trials: usize, seed: u64) -> Self {
        ExperimentConfig { learner, adversary: adversary.into(), trials, seed, jobs: None, step_cap: DEFAULT_STEP_CAP }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.learner.episodes == 0 {
            return Err(HarnessError::Config("K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-trial generators: `(environment, learner)`.
pub fn trial_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    root.set_stream(trial);
    let env = ChaCha8Rng::seed_from_u64(root.next_u64());
    let learner = ChaCha8Rng::seed_from_u64(root.next_u64());
    (env, learner)
}

/// Fills in the budget `T` from the adversary's hint when the learner needs
/// one and none was given.
pub fn resolve_budget(config: &LearnerConfig, source: &AdversarySource) -> Result<LearnerConfig, HarnessError> {
    let mut config = config.clone();
    if config.algorithm.needs_budget() && config.budget.is_none() {
        config.budget = source.budget_hint();
        if config.budget.is_none() {
            return Err(HarnessError::Config(format!("algorithm {} requires a hitting-time bound T", config.algorithm)));
        }
    }
    Ok(config)
}

/// Runs `config.trials` independent trials of the configured learner.
pub fn run_experiment(mdp: &SspMdp, source: &AdversarySource, config: &ExperimentConfig) -> Result<RegretReport, HarnessError> {
    config.validate()?;
    let fast = compute_fast_policy(mdp)?;
    let mut learner_config = resolve_budget(&config.learner, source)?;
    let base_audit_seed = learner_config.audit.seed;
    // Fail early on invalid parameters instead of once per trial.
    let parameters = Parameters::derive(mdp, &fast, &learner_config)?;
    let factory = |trial: u64| {
        let mut cfg = learner_config.clone();
        cfg.audit.seed = base_audit_seed.wrapping_add(trial);
        build_learner(mdp, &fast, &cfg)
    };
    let mut report = run_with_learners(mdp, source, config, factory)?;
    learner_config.audit.seed = base_audit_seed;
    report.parameters = Some(parameters);
    report.config = Some(ExperimentConfig { learner: learner_config, ..config.clone() });
    Ok(report)
}

/// Runs trials with learners produced by `factory(trial)`; used directly to
/// pit custom learners against the same environments.
pub fn run_with_learners<F>(
    mdp: &SspMdp,
    source: &AdversarySource,
    config: &ExperimentConfig,
    factory: F,
) -> Result<RegretReport, HarnessError>
where
    F: Fn(u64) -> Result<Box<dyn Learner>, LearnerError> + Sync,
{
    config.validate()?;
    let run = || -> Vec<Result<TrialReport, HarnessError>> {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                let learner = factory(t)?;
                run_trial(mdp, source, config, t, learner)
            })
            .collect()
    };
    let outcomes = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(RegretReport::from_outcomes(config.learner.episodes, outcomes))
}

/// Runs one trial: `K` episodes of the protocol, then the comparator.
pub fn run_trial(
    mdp: &SspMdp,
    source: &AdversarySource,
    config: &ExperimentConfig,
    trial: u64,
    mut learner: Box<dyn Learner>,
) -> Result<TrialReport, HarnessError> {
    let episodes = config.learner.episodes;
    let mut adversary = source.instantiate(mdp, trial)?;
    let (mut env_rng, mut learner_rng) = trial_rngs(config.seed, trial);
    let options = SimulationOptions { step_cap: config.step_cap };
    let mode = learner.algorithm().feedback();
    let mut history = History::default();
    let mut costs: Vec<CostFunction> = Vec::with_capacity(episodes);
    let mut cum_learner = Vec::with_capacity(episodes);
    let mut total_cost = vec![0.0; mdp.num_pairs()];
    let mut learner_total = 0.0;
    let mut diagnostics = DiagnosticsSummary::default();

    for k in 0..episodes {
        let cost = adversary.cost(k, &history)?;
        let (trace, counts) = match learner.execution(&mut learner_rng) {
            Execution::Stationary(policy) => (simulate_episode(mdp, policy, Some(&cost), &mut env_rng, options), None),
            Execution::Layered { loop_free, policy, fast } => {
                let (trace, counts) = simulate_layered(mdp, loop_free, policy, fast, Some(&cost), &mut env_rng, options);
                (trace, Some(counts))
            }
        };
        learner_total += trace.cost;
        cum_learner.push(learner_total);
        diagnostics.record_episode(&trace);
        let update = match mode {
            FeedbackMode::Full => {
                let update = learner.update(mdp, Feedback::Full { cost: &cost, counts: counts.as_ref() })?;
                if adversary.is_adaptive() {
                    history.push(trace.visits, reveal_full(&cost));
                }
                update
            }
            FeedbackMode::Bandit => {
                let counts = counts.ok_or_else(|| {
                    HarnessError::Config(format!("{} returned a stationary policy under bandit feedback", learner.algorithm()))
                })?;
                let feedback = reveal_bandit(&cost, &trace, counts);
                let update = learner.update(mdp, Feedback::Bandit(&feedback))?;
                if adversary.is_adaptive() {
                    history.push(trace.visits, feedback.observed);
                }
                update
            }
        };
        diagnostics.record_update(&update);
        for (t, c) in total_cost.iter_mut().zip(cost.as_slice()) {
            *t += c;
        }
        costs.push(cost);
    }

    let best = best_fixed_policy_for_total(mdp, &total_cost, episodes)?;
    let q_best = occupancy_of_policy(mdp, &best.policy).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut cum_comparator = Vec::with_capacity(episodes);
    let mut acc = 0.0;
    for c in &costs {
        acc += c.dot(&q_best);
        cum_comparator.push(acc);
    }
    Ok(TrialReport {
        trial,
        learner_cost: learner_total,
        comparator_cost: acc,
        regret: learner_total - acc,
        comparator_actions: best.actions,
        comparator_hitting_time: best.hitting_time,
        cum_learner,
        cum_comparator,
        diagnostics,
    })
}
