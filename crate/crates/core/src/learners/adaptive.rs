//! Adaptive SSP-O-REPS: SSP-O-REPS instances with geometrically growing
//! budgets, combined by the multi-scale experts meta-learner. Needs no bound
//! on the optimal hitting time.

use rand::RngCore;

use super::experts::MultiScaleExperts;
use super::oreps::Oreps;
use super::params::oreps_eta;
use super::{Algorithm, AuditSchedule, Execution, Feedback, Learner, LearnerError, Parameters, UpdateReport};
use crate::mdp::{FastPolicy, SspMdp};
use crate::omd::AuditReport;

/// The adaptive learner.
#[derive(Clone, Debug)]
pub struct Adaptive {
    params: Parameters,
    experts: MultiScaleExperts,
    instances: Vec<Oreps>,
    current: usize,
}

impl Adaptive {
    pub fn new(mdp: &SspMdp, fast: &FastPolicy, params: Parameters, audit: AuditSchedule) -> Result<Self, LearnerError> {
        let experts = MultiScaleExperts::from_parts(params.j0, params.scales.clone(), params.expert_rates.clone());
        let instances = experts
            .scales()
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let eta = oreps_eta(b, params.num_pairs, params.diameter, params.episodes);
                let audit = AuditSchedule { seed: audit.seed.wrapping_add(j as u64), ..audit };
                Oreps::with_rate(mdp, fast, b, eta, params.clone(), audit)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Adaptive { params, experts, instances, current: 0 })
    }

    pub fn experts(&self) -> &MultiScaleExperts {
        &self.experts
    }

    pub fn instances(&self) -> &[Oreps] {
        &self.instances
    }

    /// Index of the expert played in the current episode.
    pub fn current_expert(&self) -> usize {
        self.current
    }
}

impl Learner for Adaptive {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Adaptive
    }

    fn execution(&mut self, rng: &mut dyn RngCore) -> Execution<'_> {
        self.current = self.experts.sample(rng);
        Execution::Stationary(self.instances[self.current].policy())
    }

    fn update(&mut self, mdp: &SspMdp, feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError> {
        let Feedback::Full { cost, .. } = feedback else {
            return Err(LearnerError::Feedback("adaptive needs full-information feedback".into()));
        };
        let losses: Vec<f64> = self.instances.iter().map(|i| i.expected_cost(cost)).collect();
        let mut report = UpdateReport { min_fed_loss: f64::INFINITY, ..Default::default() };
        for inst in &mut self.instances {
            let r = inst.step(mdp, cost)?;
            if r.solver.kkt_residual >= report.solver.kkt_residual {
                report.solver = r.solver;
            }
            report.feasibility = report.feasibility.max(r.feasibility);
            report.min_fed_loss = report.min_fed_loss.min(r.min_fed_loss);
            if let Some(a) = r.audit {
                let acc = report.audit.get_or_insert(AuditReport { competitors: 0, worst_gap: f64::NEG_INFINITY });
                acc.competitors += a.competitors;
                acc.worst_gap = acc.worst_gap.max(a.worst_gap);
            }
        }
        self.experts.update(&losses);
        Ok(report)
    }

    fn pair_occupancy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.params.num_pairs];
        for (p, inst) in self.experts.probabilities().iter().zip(&self.instances) {
            for (o, q) in out.iter_mut().zip(inst.occupancy()) {
                *o += p * q;
            }
        }
        out
    }

    fn parameters(&self) -> &Parameters {
        &self.params
    }
}
