//! Grids of experiments and `√K` slope fits.

use serde::{Deserialize, Serialize};

use super::{fit_loglog_slope, run_experiment, ExperimentConfig, HarnessError, RegretReport};
use crate::adversaries::AdversarySource;
use crate::learners::Algorithm;
use crate::mdp::SspMdp;

/// Cartesian grid over learners, episode counts and seeds; every other
/// setting comes from `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub algorithms: Vec<Algorithm>,
    pub episodes: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// One grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub seed: u64,
    pub report: RegretReport,
}

/// Fit of `ln(mean R_K)` against `ln K` for one learner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub algorithm: Algorithm,
    /// `(K, mean R_K)` averaged over seeds.
    pub points: Vec<(usize, f64)>,
    /// `None` when fewer than two points have positive mean regret.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub slopes: Vec<SlopeFit>,
}

/// Runs every cell in the order learner → K → seed.
pub fn sweep(mdp: &SspMdp, source: &AdversarySource, config: &SweepConfig) -> Result<SweepReport, HarnessError> {
    if config.algorithms.is_empty() || config.episodes.is_empty() || config.seeds.is_empty() {
        return Err(HarnessError::Config("sweep grid has an empty axis".into()));
    }
    let mut cells = Vec::new();
    for &algorithm in &config.algorithms {
        for &episodes in &config.episodes {
            for &seed in &config.seeds {
                let mut cell = config.base.clone();
                cell.learner.algorithm = algorithm;
                cell.learner.episodes = episodes;
                cell.seed = seed;
                let report = run_experiment(mdp, source, &cell)?;
                cells.push(SweepCell { algorithm, episodes, seed, report });
            }
        }
    }
    let slopes = config
        .algorithms
        .iter()
        .map(|&algorithm| {
            let points: Vec<(usize, f64)> = config
                .episodes
                .iter()
                .map(|&k| {
                    let means: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.algorithm == algorithm && c.episodes == k)
                        .map(|c| c.report.mean_regret)
                        .collect();
                    (k, means.iter().sum::<f64>() / means.len() as f64)
                })
                .collect();
            let slope = fit_loglog_slope(&points.iter().map(|(k, r)| (*k as f64, *r)).collect::<Vec<_>>());
            SlopeFit { algorithm, points, slope }
        })
        .collect();
    Ok(SweepReport { cells, slopes })
}
