//! Log-barrier policy search with bandit feedback, in its expected-regret
//! form (`bandit`) and its high-probability form (`bandit-hp`: negative bias
//! in the fed loss, a floor on every aggregate, and per-pair learning rates
//! that grow by `β` whenever an aggregate drops below its threshold).

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::estimator::{bias_vector, estimate_costs};
use super::sampling::layered_competitors;
use super::{Algorithm, AuditSchedule, Execution, Feedback, Learner, LearnerError, Parameters, UpdateReport};
use crate::mdp::{FastPolicy, SspMdp, StationaryPolicy};
use crate::occupancy::{LayeredPolicy, LinearPolytope, LoopFree};
use crate::omd::{audit_minimiser, LogBarrierProjection, OmdError, SolverOptions};

/// The log-barrier learners.
#[derive(Clone, Debug)]
pub struct LogBarrierLearner {
    algorithm: Algorithm,
    params: Parameters,
    loop_free: LoopFree,
    poly: LinearPolytope,
    skew: Vec<f64>,
    groups: Vec<Vec<usize>>,
    rates: Vec<f64>,
    thresholds: Vec<f64>,
    increases: Vec<usize>,
    floor: Option<f64>,
    q: Vec<f64>,
    multipliers: Vec<f64>,
    layered: LayeredPolicy,
    fast: StationaryPolicy,
    audit: AuditSchedule,
    audit_rng: ChaCha8Rng,
    episode: u64,
    options: SolverOptions,
}

impl LogBarrierLearner {
    pub fn new(mdp: &SspMdp, fast: &FastPolicy, params: Parameters, audit: AuditSchedule) -> Result<Self, LearnerError> {
        let algorithm = params.algorithm.unwrap_or(Algorithm::Bandit);
        let hp = algorithm == Algorithm::BanditHp;
        let loop_free = LoopFree::new(mdp, params.h1, params.h2)?;
        let poly = loop_free.polytope(mdp, params.budget)?;
        let skew = loop_free.skew_weights(params.lambda);
        let groups = loop_free.groups().to_vec();
        let floor = hp.then_some(params.floor);
        let options = SolverOptions::default();

        // Strictly interior start: uniform occupancy mixed with the fastest
        // one so that the budget has slack.
        let uniform = loop_free.occupancy_of(mdp, &loop_free.uniform(mdp));
        let fastest = loop_free.occupancy_of(mdp, &loop_free.fastest_policy(mdp));
        let (mu, mf) = (poly.total_mass(&uniform), poly.total_mass(&fastest));
        if params.budget <= mf {
            return Err(LearnerError::Parameter(format!(
                "T = {} leaves no strictly feasible layered occupancy (smallest mass {mf:.6})",
                params.budget
            )));
        }
        let target = mu.min(mf + 0.5 * (params.budget - mf));
        let t = if mu > target { (mu - target) / (mu - mf) } else { 0.0 };
        let start: Vec<f64> = uniform.iter().zip(&fastest).map(|(u, f)| (1.0 - t) * u + t * f).collect();
        if let Some(f) = floor {
            let agg = loop_free.aggregate(&start);
            if agg.iter().any(|a| *a <= f) {
                return Err(OmdError::InfeasibleFloor(format!(
                    "no strictly interior point found above the floor {f:.3e}; K may be too small"
                ))
                .into());
            }
        }
        let n_groups = groups.len();
        let rates = vec![params.eta; n_groups];
        let zeros = vec![0.0; n_groups];
        let proj = LogBarrierProjection {
            polytope: &poly,
            groups: &groups,
            skew: &skew,
            rates: &rates,
            loss: &zeros,
            inv_center: &zeros,
            floor,
        };
        let sol = proj.solve(&start, None, &options)?;
        let layered = loop_free.policy_of(mdp, &sol.x);
        Ok(LogBarrierLearner {
            algorithm,
            thresholds: vec![params.rho1; n_groups],
            increases: vec![0; n_groups],
            params,
            loop_free,
            poly,
            skew,
            groups,
            rates,
            floor,
            q: sol.x,
            multipliers: sol.multipliers,
            layered,
            fast: fast.policy.clone(),
            audit_rng: ChaCha8Rng::seed_from_u64(audit.seed),
            audit,
            episode: 0,
            options,
        })
    }

    pub fn loop_free(&self) -> &LoopFree {
        &self.loop_free
    }

    /// Current layered occupancy (unskewed).
    pub fn occupancy(&self) -> &[f64] {
        &self.q
    }

    /// Per-pair learning rates `η_k(s,a)`.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Per-pair thresholds `ρ_k(s,a)`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of rate increases per pair so far.
    pub fn rate_increases(&self) -> &[usize] {
        &self.increases
    }

    /// Skewed aggregates `q̆(s,a) = Σ_h (1+λh) q(s,a,h)`.
    pub fn skewed_aggregates(&self) -> Vec<f64> {
        self.loop_free.aggregate_weighted(&self.q, &self.skew)
    }

    fn feasibility(&self) -> f64 {
        let mut r = self.poly.residual(&self.q);
        if let Some(f) = self.floor {
            for a in self.loop_free.aggregate(&self.q) {
                r = r.max(f - a);
            }
        }
        r
    }

    fn step(&mut self, mdp: &SspMdp, feedback: &super::BanditFeedback) -> Result<UpdateReport, LearnerError> {
        self.episode += 1;
        let estimate = estimate_costs(mdp, &self.loop_free, &self.q, &feedback.counts, &feedback.observed)?;
        let loss: Vec<f64> = if self.algorithm == Algorithm::BanditHp {
            let bias = bias_vector(&self.loop_free, &self.q, &estimate);
            estimate.iter().zip(&bias).map(|(c, b)| c - self.params.gamma * b).collect()
        } else {
            estimate
        };
        let inv_center: Vec<f64> = self.skewed_aggregates().iter().map(|y| 1.0 / y).collect();
        let proj = LogBarrierProjection {
            polytope: &self.poly,
            groups: &self.groups,
            skew: &self.skew,
            rates: &self.rates,
            loss: &loss,
            inv_center: &inv_center,
            floor: self.floor,
        };
        let sol = proj.solve(&self.q, Some(&self.multipliers), &self.options)?;
        let mut report = UpdateReport {
            solver: sol.diagnostics,
            min_fed_loss: loss.iter().copied().fold(f64::INFINITY, f64::min),
            ..Default::default()
        };
        if self.audit.due(self.episode) {
            let comp = layered_competitors(
                mdp,
                &self.loop_free,
                &self.poly,
                self.floor,
                &sol.x,
                self.audit.samples,
                &mut self.audit_rng,
            );
            report.audit = Some(audit_minimiser(|x| proj.objective(x), &sol.x, &comp));
        }
        self.q = sol.x;
        self.multipliers = sol.multipliers;
        if self.algorithm == Algorithm::BanditHp {
            for (g, y) in self.skewed_aggregates().iter().enumerate() {
                if 1.0 / y > self.thresholds[g] {
                    self.thresholds[g] = 2.0 / y;
                    self.rates[g] *= self.params.beta;
                    self.increases[g] += 1;
                    report.rate_increases += 1;
                }
            }
        }
        self.layered = self.loop_free.policy_of(mdp, &self.q);
        report.feasibility = self.feasibility();
        Ok(report)
    }
}

impl Learner for LogBarrierLearner {
    fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    fn execution(&mut self, _rng: &mut dyn RngCore) -> Execution<'_> {
        Execution::Layered { loop_free: &self.loop_free, policy: &self.layered, fast: &self.fast }
    }

    fn update(&mut self, mdp: &SspMdp, feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError> {
        match feedback {
            Feedback::Bandit(b) => self.step(mdp, b),
            Feedback::Full { .. } => {
                Err(LearnerError::Feedback(format!("{} expects bandit feedback", self.algorithm)))
            }
        }
    }

    fn pair_occupancy(&self) -> Vec<f64> {
        self.loop_free.to_pairs(&self.q)
    }

    fn parameters(&self) -> &Parameters {
        &self.params
    }
}
