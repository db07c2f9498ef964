//! A regret experiment: every learner against a random oblivious adversary
//! on the toy instance, with solver diagnostics.

use anyhow::Result;

use ssp_lab::adversaries::AdversarySource;
use ssp_lab::harness::{run_experiment, ExperimentConfig};
use ssp_lab::learners::{Algorithm, LearnerConfig};
use ssp_lab::toy;

fn main() -> Result<()> {
    let mdp = toy::three_state();
    let spec = "random:1";
    let source = AdversarySource::load(&spec.parse()?, &mdp)?;
    for alg in Algorithm::ALL {
        let mut learner = LearnerConfig::new(alg, 512, alg.needs_budget().then_some(8.0));
        learner.h1 = Some(6);
        let report = run_experiment(&mdp, &source, &ExperimentConfig::new(learner, spec, 5, 0))?;
        let d = report.diagnostics;
        println!(
            "{alg:>10}: mean regret {:>8.3} ± {:.3}, failed trials {}, max KKT {:.1e}",
            report.mean_regret,
            report.std_error,
            report.failures.len(),
            d.max_kkt_residual
        );
    }
    Ok(())
}
