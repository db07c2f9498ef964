//! The hard instance family: its structure, the Bernoulli cost law and a
//! learner run against it with the law's hitting-time bound.

use anyhow::Result;

use ssp_lab::adversaries::{build_lower_bound, AdversarySource, LowerBoundMode, LowerBoundParams};
use ssp_lab::harness::{run_experiment, ExperimentConfig};
use ssp_lab::learners::{Algorithm, LearnerConfig};
use ssp_lab::mdp::{compute_fast_policy, compute_hitting_times};

fn main() -> Result<()> {
    let params =
        LowerBoundParams { diameter: 4, t_star: 8, episodes: 2048, mode: LowerBoundMode::Full, branches: 3, seed: 7 };
    let lb = build_lower_bound(params)?;
    let s0 = lb.mdp.initial().0;
    println!("{} states, diameter {:.3}", lb.mdp.num_states(), compute_fast_policy(&lb.mdp)?.diameter);
    for j in 1..=lb.law.branches {
        println!("  branch {j}: hitting time {:.3}", compute_hitting_times(&lb.mdp, &lb.branch_policy(j))?[s0]);
    }
    println!("α = {:.4}, ε = {:.3e}, good branch {}", lb.law.alpha, lb.law.epsilon, lb.law.good_index);

    let budget = lb.law.budget_hint;
    let source = AdversarySource::Law(lb.law);
    let learner = LearnerConfig::new(Algorithm::Oreps, params.episodes, budget);
    let report = run_experiment(&lb.mdp, &source, &ExperimentConfig::new(learner, "lowerbound", 5, 0))?;
    println!("O-REPS regret over K = {}: {:.3} ± {:.3}", params.episodes, report.mean_regret, report.std_error);
    Ok(())
}
