//! Regret reports, diagnostic summaries and output files.

use std::io::Write;

use serde::Serialize;

use super::{ExperimentConfig, HarnessError, PropertyLedger, SlopeFit};
use crate::learners::{Parameters, UpdateReport};
use crate::mdp::EpisodeTrace;

/// Worst-case solver and simulation statistics over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub episodes: u64,
    /// Episodes cut off by the step cap.
    pub truncations: u64,
    pub total_steps: u64,
    pub max_kkt_residual: f64,
    pub max_primal_residual: f64,
    /// Largest membership violation of an iterate.
    pub max_feasibility_residual: f64,
    pub max_solver_iterations: usize,
    pub fallback_steps: usize,
    pub restarts: usize,
    /// Number of projection audits performed.
    pub audits: u64,
    /// Largest `F(x*) − F(z)` over all audited competitors (≤ 0 means every
    /// competitor was beaten).
    pub worst_audit_gap: f64,
    /// Learning-rate increases (bandit-hp).
    pub rate_increases: usize,
}

impl DiagnosticsSummary {
    pub(crate) fn record_episode(&mut self, trace: &EpisodeTrace) {
        self.episodes += 1;
        self.total_steps += trace.steps;
        self.truncations += u64::from(trace.truncated);
    }

    pub(crate) fn record_update(&mut self, update: &UpdateReport) {
        let s = &update.solver;
        self.max_kkt_residual = self.max_kkt_residual.max(s.kkt_residual);
        self.max_primal_residual = self.max_primal_residual.max(s.primal_residual);
        self.max_feasibility_residual = self.max_feasibility_residual.max(update.feasibility);
        self.max_solver_iterations = self.max_solver_iterations.max(s.iterations);
        self.fallback_steps += s.fallback_steps;
        self.restarts += s.restarts;
        if let Some(audit) = update.audit {
            self.worst_audit_gap = if self.audits == 0 { audit.worst_gap } else { self.worst_audit_gap.max(audit.worst_gap) };
            self.audits += 1;
        }
        self.rate_increases = self.rate_increases.max(update.rate_increases);
    }

    /// Combines the summaries of several trials.
    pub fn merge(&mut self, other: &DiagnosticsSummary) {
        self.episodes += other.episodes;
        self.truncations += other.truncations;
        self.total_steps += other.total_steps;
        self.max_kkt_residual = self.max_kkt_residual.max(other.max_kkt_residual);
        self.max_primal_residual = self.max_primal_residual.max(other.max_primal_residual);
        self.max_feasibility_residual = self.max_feasibility_residual.max(other.max_feasibility_residual);
        self.max_solver_iterations = self.max_solver_iterations.max(other.max_solver_iterations);
        self.fallback_steps += other.fallback_steps;
        self.restarts += other.restarts;
        if other.audits > 0 {
            self.worst_audit_gap =
                if self.audits == 0 { other.worst_audit_gap } else { self.worst_audit_gap.max(other.worst_audit_gap) };
        }
        self.audits += other.audits;
        self.rate_increases = self.rate_increases.max(other.rate_increases);
    }
}

/// Outcome of one successful trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: u64,
    /// `Σ_k ⟨N_k, c_k⟩`.
    pub learner_cost: f64,
    /// `Σ_k J_k^{π*}(s0)` for the best fixed deterministic policy in
    /// hindsight on the realised costs.
    pub comparator_cost: f64,
    /// `R_K = learner_cost − comparator_cost`.
    pub regret: f64,
    pub comparator_actions: Vec<usize>,
    pub comparator_hitting_time: f64,
    /// Cumulative learner cost after each episode.
    #[serde(skip)]
    pub cum_learner: Vec<f64>,
    /// Cumulative comparator cost after each episode.
    #[serde(skip)]
    pub cum_comparator: Vec<f64>,
    pub diagnostics: DiagnosticsSummary,
}

/// A trial that stopped with an error; other trials are unaffected.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub message: String,
    /// Whether the failure was an infeasible floor or a solver that did not
    /// converge.
    pub solver_failure: bool,
}

/// Aggregated result of an experiment.
#[derive(Clone, Debug, Serialize)]
pub struct RegretReport {
    pub episodes: usize,
    pub config: Option<ExperimentConfig>,
    pub parameters: Option<Parameters>,
    pub trials: Vec<TrialReport>,
    pub failures: Vec<TrialFailure>,
    /// Mean of `R_K` over successful trials.
    pub mean_regret: f64,
    /// Sample standard deviation of `R_K`.
    pub std_regret: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub mean_learner_cost: f64,
    pub diagnostics: DiagnosticsSummary,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    (mean, var.sqrt())
}

impl RegretReport {
    pub(crate) fn from_outcomes(episodes: usize, outcomes: Vec<Result<TrialReport, HarnessError>>) -> Self {
        let mut trials = Vec::new();
        let mut failures = Vec::new();
        for (t, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => trials.push(r),
                Err(e) => failures.push(TrialFailure { trial: t as u64, solver_failure: e.is_solver_failure(), message: e.to_string() }),
            }
        }
        let regrets: Vec<f64> = trials.iter().map(|t| t.regret).collect();
        let (mean_regret, std_regret) = mean_std(&regrets);
        let (mean_learner_cost, _) = mean_std(&trials.iter().map(|t| t.learner_cost).collect::<Vec<_>>());
        let mut diagnostics = DiagnosticsSummary::default();
        for t in &trials {
            diagnostics.merge(&t.diagnostics);
        }
        RegretReport {
            episodes,
            config: None,
            parameters: None,
            std_error: std_regret / (trials.len() as f64).sqrt(),
            trials,
            failures,
            mean_regret,
            std_regret,
            mean_learner_cost,
            diagnostics,
        }
    }

    pub fn regrets(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.regret).collect()
    }

    pub fn summary(&self) -> ExperimentSummary {
        ExperimentSummary {
            config: self.config.clone(),
            parameters: self.parameters.clone(),
            per_trial_regret: self.regrets(),
            mean_regret: self.mean_regret,
            std_regret: self.std_regret,
            std_error: self.std_error,
            mean_learner_cost: self.mean_learner_cost,
            failures: self.failures.clone(),
            diagnostics: self.diagnostics,
            slope_fits: Vec::new(),
            property_ledger: None,
        }
    }
}

/// The JSON summary written next to the CSV.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub config: Option<ExperimentConfig>,
    pub parameters: Option<Parameters>,
    pub per_trial_regret: Vec<f64>,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub std_error: f64,
    pub mean_learner_cost: f64,
    pub failures: Vec<TrialFailure>,
    pub diagnostics: DiagnosticsSummary,
    pub slope_fits: Vec<SlopeFit>,
    pub property_ledger: Option<PropertyLedger>,
}

/// Writes one row per (trial, episode): `trial, episode, cum_learner_cost,
/// cum_comparator_cost, regret` (episodes 1-based).
pub fn write_regret_csv<W: Write>(report: &RegretReport, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "episode", "cum_learner_cost", "cum_comparator_cost", "regret"])?;
    for t in &report.trials {
        for (k, (l, c)) in t.cum_learner.iter().zip(&t.cum_comparator).enumerate() {
            w.write_record([t.trial.to_string(), (k + 1).to_string(), l.to_string(), c.to_string(), (l - c).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`; `None` when fewer than two
/// points have positive coordinates.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = [1024.0, 4096.0, 16384.0].iter().map(|k: &f64| (*k, 3.0 * k.sqrt())).collect();
        assert!((fit_loglog_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(fit_loglog_slope(&[(1.0, 1.0)]), None);
        assert_eq!(fit_loglog_slope(&[(1.0, -1.0), (2.0, 3.0)]), None);
    }
}
