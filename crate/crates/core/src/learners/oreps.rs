//! SSP-O-REPS: entropic mirror descent over `Δ(T)` with full information.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampling::flat_competitors;
use super::{Algorithm, AuditSchedule, Execution, Feedback, Learner, LearnerError, Parameters, UpdateReport};
use crate::mdp::{CostFunction, FastPolicy, SspMdp, StationaryPolicy};
use crate::occupancy::{occupancy_of_policy, FlatPolytope};
use crate::omd::{audit_minimiser, DualPoint, EntropyProjection, SolverOptions};

/// Relative slack below which `T` is treated as the fastest hitting time, in
/// which case `Δ(T)` is the single fast occupancy.
const DEGENERATE_BUDGET: f64 = 1e-9;

/// The SSP-O-REPS learner.
#[derive(Clone, Debug)]
pub struct Oreps {
    params: Parameters,
    poly: FlatPolytope,
    q: Vec<f64>,
    /// `ln q`, the reference point of the next step.
    log_q: Vec<f64>,
    dual: Option<DualPoint>,
    policy: StationaryPolicy,
    /// `Δ(T)` is a single point; updates keep it.
    degenerate: bool,
    audit: AuditSchedule,
    audit_rng: ChaCha8Rng,
    episode: u64,
    options: SolverOptions,
}

impl Oreps {
    pub fn new(mdp: &SspMdp, fast: &FastPolicy, params: Parameters, audit: AuditSchedule) -> Result<Self, LearnerError> {
        Self::with_rate(mdp, fast, params.budget, params.eta, params, audit)
    }

    /// An instance with explicit budget and learning rate (used by the
    /// adaptive meta-learner for its experts).
    pub(crate) fn with_rate(
        mdp: &SspMdp,
        fast: &FastPolicy,
        budget: f64,
        eta: f64,
        mut params: Parameters,
        audit: AuditSchedule,
    ) -> Result<Self, LearnerError> {
        params.budget = budget;
        params.eta = eta;
        let poly = FlatPolytope::new(mdp, budget)?;
        let options = SolverOptions::default();
        let t_fast = fast.initial_hitting_time(mdp);
        let degenerate = budget <= t_fast * (1.0 + DEGENERATE_BUDGET);
        let (q, log_q, dual) = if degenerate {
            {
            let q = poly.from_pairs(&occupancy_of_policy(mdp, &fast.policy)?);
            let log_q = q.iter().map(|v| v.ln()).collect();
            (q, log_q, None)
        }
        } else {
            // argmin of the entropy: projection of e^{-1}·1 without cost.
            let n = poly.linear().num_vars();
            let ones = vec![1.0; n];
            let center = vec![-1.0; n];
            let zeros = vec![0.0; n];
            let proj = EntropyProjection { polytope: poly.linear(), weights: &ones, eta, cost: &zeros, log_center: &center };
            let sol = proj.solve(None, &options)?;
            (sol.x, sol.log_x, Some(sol.dual))
        };
        let policy = StationaryPolicy::from_pair_weights(mdp, &poly.to_pairs(&q));
        Ok(Oreps {
            params,
            poly,
            q,
            log_q,
            dual,
            policy,
            degenerate,
            audit_rng: ChaCha8Rng::seed_from_u64(audit.seed),
            audit,
            episode: 0,
            options,
        })
    }

    /// Current occupancy over the original pairs.
    pub fn occupancy(&self) -> Vec<f64> {
        self.poly.to_pairs(&self.q)
    }

    /// `⟨q_k, c⟩`.
    pub fn expected_cost(&self, cost: &CostFunction) -> f64 {
        self.poly.vars().iter().zip(&self.q).map(|(p, x)| cost.get(*p) * x).sum()
    }

    pub fn policy(&self) -> &StationaryPolicy {
        &self.policy
    }

    /// One mirror-descent step on the cost `c`.
    pub(crate) fn step(&mut self, mdp: &SspMdp, cost: &CostFunction) -> Result<UpdateReport, LearnerError> {
        self.episode += 1;
        let mut report = UpdateReport { min_fed_loss: cost.as_slice().iter().copied().fold(f64::INFINITY, f64::min), ..Default::default() };
        if !self.degenerate {
            let n = self.q.len();
            let ones = vec![1.0; n];
            let c: Vec<f64> = self.poly.vars().iter().map(|p| cost.get(*p)).collect();
            let proj = EntropyProjection {
                polytope: self.poly.linear(),
                weights: &ones,
                eta: self.params.eta,
                cost: &c,
                log_center: &self.log_q,
            };
            let sol = proj.solve(self.dual.as_ref(), &self.options)?;
            report.solver = sol.diagnostics;
            if self.audit.due(self.episode) {
                let comp = flat_competitors(mdp, &self.poly, &sol.x, self.audit.samples, &mut self.audit_rng);
                report.audit = Some(audit_minimiser(|x| proj.objective(x), &sol.x, &comp));
            }
            self.q = sol.x;
            self.log_q = sol.log_x;
            self.dual = Some(sol.dual);
            self.policy = StationaryPolicy::from_pair_weights(mdp, &self.poly.to_pairs(&self.q));
        }
        report.feasibility = self.poly.linear().residual(&self.q);
        Ok(report)
    }
}

impl Learner for Oreps {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Oreps
    }

    fn execution(&mut self, _rng: &mut dyn RngCore) -> Execution<'_> {
        Execution::Stationary(&self.policy)
    }

    fn update(&mut self, mdp: &SspMdp, feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError> {
        match feedback {
            Feedback::Full { cost, .. } => self.step(mdp, cost),
            Feedback::Bandit(_) => Err(LearnerError::Feedback("oreps needs full-information feedback".into())),
        }
    }

    fn pair_occupancy(&self) -> Vec<f64> {
        self.occupancy()
    }

    fn parameters(&self) -> &Parameters {
        &self.params
    }
}
