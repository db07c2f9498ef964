//! Entropic mirror descent over the skewed layered occupancy space, with
//! full information.
//!
//! Iterates are stored as unskewed layered occupancies `q`; the regulariser
//! `(1/η) Σ q̆ ln q̆` acts on the skewed coordinates `q̆ = (1+λh) q`, which is
//! a weighted entropy in `q` with weights `ω = 1+λh` (and a linear term that
//! only matters for the initial point).

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampling::layered_competitors;
use super::{Algorithm, AuditSchedule, Execution, Feedback, Learner, LearnerError, Parameters, UpdateReport};
use crate::mdp::{CostFunction, FastPolicy, SspMdp, StationaryPolicy};
use crate::occupancy::{LayeredPolicy, LinearPolytope, LoopFree};
use crate::omd::{audit_minimiser, DualPoint, EntropyProjection, SolverOptions};

/// The skewed-occupancy learner.
#[derive(Clone, Debug)]
pub struct Skewed {
    params: Parameters,
    loop_free: LoopFree,
    poly: LinearPolytope,
    weights: Vec<f64>,
    q: Vec<f64>,
    /// `ln q`, the reference point of the next step.
    log_q: Vec<f64>,
    dual: Option<DualPoint>,
    layered: LayeredPolicy,
    fast: StationaryPolicy,
    degenerate: bool,
    audit: AuditSchedule,
    audit_rng: ChaCha8Rng,
    episode: u64,
    options: SolverOptions,
}

/// Linear term making `Σ ω x ln(x/e^{-1})/η` equal `ψ` up to a constant:
/// `ln ω_i / η` per unit of `ω_i x_i`, and for the fast chain
/// `Σ_h ω_h ln ω_h / (η W)`.
pub(crate) fn entropy_offset(loop_free: &LoopFree, lambda: f64, eta: f64) -> Vec<f64> {
    let weights = loop_free.skew_weights(lambda);
    let mut c: Vec<f64> = weights.iter().map(|w| w.ln() / eta).collect();
    if let Some(f) = loop_free.fast_var() {
        let s: f64 = (loop_free.h1() + 1..=loop_free.horizon())
            .map(|h| {
                let w = 1.0 + lambda * h as f64;
                w * w.ln()
            })
            .sum();
        c[f] = s / (eta * weights[f]);
    }
    c
}

impl Skewed {
    pub fn new(mdp: &SspMdp, fast: &FastPolicy, params: Parameters, audit: AuditSchedule) -> Result<Self, LearnerError> {
        let loop_free = LoopFree::new(mdp, params.h1, params.h2)?;
        let poly = loop_free.polytope(mdp, params.budget)?;
        let weights = loop_free.skew_weights(params.lambda);
        let options = SolverOptions::default();
        let fastest = loop_free.occupancy_of(mdp, &loop_free.fastest_policy(mdp));
        let min_mass = poly.total_mass(&fastest);
        if params.budget < min_mass * (1.0 - 1e-12) {
            return Err(LearnerError::Parameter(format!(
                "T = {} is below the smallest layered mass {min_mass:.6}; the decision set is empty",
                params.budget
            )));
        }
        let degenerate = params.budget <= min_mass * (1.0 + 1e-9);
        let (q, log_q, dual) = if degenerate {
            let log_q = fastest.iter().map(|v| v.ln()).collect();
            (fastest, log_q, None)
        } else {
            let n = poly.num_vars();
            let offset = entropy_offset(&loop_free, params.lambda, params.eta);
            let center = vec![-1.0; n];
            let proj = EntropyProjection { polytope: &poly, weights: &weights, eta: params.eta, cost: &offset, log_center: &center };
            let sol = proj.solve(None, &options)?;
            (sol.x, sol.log_x, Some(sol.dual))
        };
        let layered = loop_free.policy_of(mdp, &q);
        Ok(Skewed {
            params,
            loop_free,
            poly,
            weights,
            q,
            log_q,
            dual,
            layered,
            fast: fast.policy.clone(),
            degenerate,
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

    fn step(&mut self, mdp: &SspMdp, cost: &CostFunction) -> Result<UpdateReport, LearnerError> {
        self.episode += 1;
        let c = self.loop_free.lifted_cost(cost);
        let mut report = UpdateReport { min_fed_loss: c.iter().copied().fold(f64::INFINITY, f64::min), ..Default::default() };
        if !self.degenerate {
            let proj = EntropyProjection {
                polytope: &self.poly,
                weights: &self.weights,
                eta: self.params.eta,
                cost: &c,
                log_center: &self.log_q,
            };
            let sol = proj.solve(self.dual.as_ref(), &self.options)?;
            report.solver = sol.diagnostics;
            if self.audit.due(self.episode) {
                let comp = layered_competitors(
                    mdp,
                    &self.loop_free,
                    &self.poly,
                    None,
                    &sol.x,
                    self.audit.samples,
                    &mut self.audit_rng,
                );
                report.audit = Some(audit_minimiser(|x| proj.objective(x), &sol.x, &comp));
            }
            self.q = sol.x;
            self.log_q = sol.log_x;
            self.dual = Some(sol.dual);
            self.layered = self.loop_free.policy_of(mdp, &self.q);
        }
        report.feasibility = self.poly.residual(&self.q);
        Ok(report)
    }
}

impl Learner for Skewed {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Skewed
    }

    fn execution(&mut self, _rng: &mut dyn RngCore) -> Execution<'_> {
        Execution::Layered { loop_free: &self.loop_free, policy: &self.layered, fast: &self.fast }
    }

    fn update(&mut self, mdp: &SspMdp, feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError> {
        match feedback {
            Feedback::Full { cost, .. } => self.step(mdp, cost),
            Feedback::Bandit(_) => Err(LearnerError::Feedback("skewed needs full-information feedback".into())),
        }
    }

    fn pair_occupancy(&self) -> Vec<f64> {
        self.loop_free.to_pairs(&self.q)
    }

    fn parameters(&self) -> &Parameters {
        &self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerConfig;
    use crate::mdp::compute_fast_policy;
    use crate::toy;

    #[test]
    fn initial_point_minimises_the_skewed_entropy() {
        let m = toy::three_state();
        let fast = compute_fast_policy(&m).unwrap();
        let mut cfg = LearnerConfig::new(Algorithm::Skewed, 512, Some(6.0));
        cfg.h1 = Some(6);
        let p = Parameters::derive(&m, &fast, &cfg).unwrap();
        let lambda = 0.3;
        let p = Parameters { lambda, ..p };
        let l = Skewed::new(&m, &fast, p.clone(), AuditSchedule::default()).unwrap();
        // ψ evaluated on the full skewed coordinates, fast chain expanded.
        let lf = l.loop_free();
        let psi = |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..lf.num_layer_vars() {
                let v = (1.0 + lambda * lf.var_layer(i) as f64) * x[i];
                s += v * v.ln();
            }
            if let Some(f) = lf.fast_var() {
                for h in lf.h1() + 1..=lf.horizon() {
                    let v = (1.0 + lambda * h as f64) * x[f];
                    s += v * v.ln();
                }
            }
            s / p.eta
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let comp = layered_competitors(&m, lf, &l.poly, None, &l.q, 300, &mut rng);
        let report = audit_minimiser(psi, &l.q, &comp);
        assert!(report.worst_gap <= 1e-9, "{report:?}");
    }
}
