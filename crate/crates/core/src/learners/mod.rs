//! The five online learners behind one interface.
//!
//! Every learner follows the same episode protocol, driven by the harness:
//!
//! 1. [`Learner::execution`] returns the policy to run this episode (a
//!    stationary policy, or a layered policy executed through the loop-free
//!    reduction);
//! 2. the harness simulates the episode;
//! 3. [`Learner::update`] receives the feedback — the whole cost function
//!    (full information) or only the costs of visited pairs (bandit).
//!
//! | id          | feedback | decision set                        | regulariser              |
//! |-------------|----------|-------------------------------------|--------------------------|
//! | `oreps`     | full     | `Δ(T)`                              | negative entropy         |
//! | `adaptive`  | full     | experts over `oreps` with `T = b(j)` | multi-rate entropy       |
//! | `skewed`    | full     | skewed layered polytope             | entropy on skewed coords |
//! | `bandit`    | bandit   | skewed layered polytope             | aggregated log-barrier   |
//! | `bandit-hp` | bandit   | floored skewed layered polytope     | log-barrier, rising rates |

mod adaptive;
mod bandit;
pub mod estimator;
mod experts;
mod oreps;
mod params;
mod sampling;
mod skewed;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{CostFunction, FastPolicy, MdpError, SspMdp, StationaryPolicy};
use crate::occupancy::{LayeredCounts, LayeredPolicy, LoopFree, OccupancyError};
use crate::omd::{AuditReport, OmdError, SolverDiagnostics};

pub use adaptive::Adaptive;
pub use bandit::LogBarrierLearner;
pub use experts::MultiScaleExperts;
pub use oreps::Oreps;
pub use params::{
    default_first_stage_horizon, oreps_eta, second_stage_horizon, LearnerConfig, Overrides, Parameters, DEFAULT_DELTA,
};
pub use skewed::Skewed;

/// Errors raised by learners.
#[derive(Debug, Error)]
pub enum LearnerError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error(transparent)]
    Solver(#[from] OmdError),
    #[error("invalid learner parameter: {0}")]
    Parameter(String),
    #[error("pair {pair} was visited but has zero probability under the learner's occupancy")]
    DivisionHazard { pair: String },
    #[error("feedback mode mismatch: {0}")]
    Feedback(String),
}

/// Learner identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Oreps,
    Adaptive,
    Skewed,
    Bandit,
    BanditHp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Oreps, Algorithm::Adaptive, Algorithm::Skewed, Algorithm::Bandit, Algorithm::BanditHp];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Oreps => "oreps",
            Algorithm::Adaptive => "adaptive",
            Algorithm::Skewed => "skewed",
            Algorithm::Bandit => "bandit",
            Algorithm::BanditHp => "bandit-hp",
        }
    }

    /// The feedback the learner is designed for.
    pub fn feedback(self) -> FeedbackMode {
        match self {
            Algorithm::Bandit | Algorithm::BanditHp => FeedbackMode::Bandit,
            _ => FeedbackMode::Full,
        }
    }

    /// Whether the learner needs the hitting-time bound `T`.
    pub fn needs_budget(self) -> bool {
        self != Algorithm::Adaptive
    }

    /// Whether the learner runs on the loop-free reduction.
    pub fn is_layered(self) -> bool {
        matches!(self, Algorithm::Skewed | Algorithm::Bandit | Algorithm::BanditHp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| LearnerError::Parameter(format!("unknown algorithm '{s}' (expected oreps, adaptive, skewed, bandit or bandit-hp)")))
    }
}

/// Feedback revealed after an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    Full,
    Bandit,
}

/// Bandit observation: layered visit indicators and the costs of the pairs
/// visited during the episode (and only those).
#[derive(Clone, Debug)]
pub struct BanditFeedback {
    pub counts: LayeredCounts,
    /// `Some(c_k(s,a))` iff `(s,a)` was visited.
    pub observed: Vec<Option<f64>>,
}

/// What the learner receives after an episode.
#[derive(Clone, Copy, Debug)]
pub enum Feedback<'a> {
    Full { cost: &'a CostFunction, counts: Option<&'a LayeredCounts> },
    Bandit(&'a BanditFeedback),
}

/// The policy to execute in the next episode.
#[derive(Clone, Copy, Debug)]
pub enum Execution<'a> {
    Stationary(&'a StationaryPolicy),
    Layered { loop_free: &'a LoopFree, policy: &'a LayeredPolicy, fast: &'a StationaryPolicy },
}

/// Per-update diagnostics.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct UpdateReport {
    /// Diagnostics of the worst (largest KKT residual) solve of the update.
    pub solver: SolverDiagnostics,
    /// Optimality audit, when scheduled for this episode.
    pub audit: Option<AuditReport>,
    /// Constraint residual of the new iterate in its polytope.
    pub feasibility: f64,
    /// Smallest entry of the loss fed to the mirror-descent step.
    pub min_fed_loss: f64,
    /// Learning-rate increases triggered by this update.
    pub rate_increases: usize,
}

/// Which updates are audited against random feasible competitors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSchedule {
    /// Number of competitors per audit (0 disables audits).
    pub samples: usize,
    /// Audit updates `k` that are powers of two or multiples of this period.
    pub period: u64,
    /// Seed of the audit's own random stream (never shared with the learner).
    pub seed: u64,
}

impl Default for AuditSchedule {
    fn default() -> Self {
        AuditSchedule { samples: 0, period: 256, seed: 0 }
    }
}

impl AuditSchedule {
    pub fn due(&self, k: u64) -> bool {
        self.samples > 0 && k > 0 && (k.is_power_of_two() || k % self.period.max(1) == 0)
    }
}

/// An online learner for adversarial SSP.
pub trait Learner: Send {
    fn algorithm(&self) -> Algorithm;

    /// The policy for the current episode. `rng` is the learner's own random
    /// stream (used only for internal randomisation such as expert sampling).
    fn execution(&mut self, rng: &mut dyn RngCore) -> Execution<'_>;

    /// Consumes the feedback of the current episode and advances.
    fn update(&mut self, mdp: &SspMdp, feedback: Feedback<'_>) -> Result<UpdateReport, LearnerError>;

    /// Occupancy of the current iterate aggregated over the original pairs.
    fn pair_occupancy(&self) -> Vec<f64>;

    /// The derived parameters.
    fn parameters(&self) -> &Parameters;
}

/// Builds the learner described by `config` for `mdp`.
pub fn build_learner(
    mdp: &SspMdp,
    fast: &FastPolicy,
    config: &LearnerConfig,
) -> Result<Box<dyn Learner>, LearnerError> {
    let params = Parameters::derive(mdp, fast, config)?;
    Ok(match config.algorithm {
        Algorithm::Oreps => Box::new(Oreps::new(mdp, fast, params, config.audit)?),
        Algorithm::Adaptive => Box::new(Adaptive::new(mdp, fast, params, config.audit)?),
        Algorithm::Skewed => Box::new(Skewed::new(mdp, fast, params, config.audit)?),
        Algorithm::Bandit | Algorithm::BanditHp => Box::new(LogBarrierLearner::new(mdp, fast, params, config.audit)?),
    })
}
