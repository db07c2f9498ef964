//! A sweep over learners, episode counts and seeds with the fitted log-log
//! regret slopes.

use anyhow::Result;

use ssp_lab::adversaries::AdversarySource;
use ssp_lab::harness::{sweep, ExperimentConfig, SweepConfig};
use ssp_lab::learners::{Algorithm, LearnerConfig};
use ssp_lab::toy;

fn main() -> Result<()> {
    let mdp = toy::three_state();
    let source = AdversarySource::load(&"alternating:1".parse()?, &mdp)?;
    let grid = SweepConfig {
        base: ExperimentConfig::new(LearnerConfig::new(Algorithm::Oreps, 1, Some(8.0)), "alternating:1", 5, 0),
        algorithms: vec![Algorithm::Oreps, Algorithm::Adaptive],
        episodes: vec![256, 1024, 4096],
        seeds: vec![0, 1],
    };
    let report = sweep(&mdp, &source, &grid)?;
    for fit in &report.slopes {
        let slope = fit.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
        println!("{:>10}: points {:?}, slope {slope}", fit.algorithm, fit.points);
    }
    Ok(())
}
