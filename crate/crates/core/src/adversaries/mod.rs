//! Cost generators: oblivious sequences, adaptive callbacks, the stochastic
//! lower-bound environments, and the bandit feedback filter.
//!
//! Adversaries are created per trial. They see only the episode index and
//! the public history (past visit counts and past revealed costs), never the
//! learner's internal state or the current episode's randomness.

mod adaptive;
mod feedback;
mod lower_bound;
mod oblivious;

use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::mdp::{CostFunction, MdpError, SspMdp};

pub use adaptive::{Callback, FollowLearner};
pub use feedback::{reveal_bandit, reveal_full};
pub use lower_bound::{build_lower_bound, CostLaw, LawAdversary, LowerBound, LowerBoundMode, LowerBoundParams};
pub use oblivious::{load_cost_sequence, save_cost_sequence, Alternating, Constant, Sequence, UniformRandom};

/// Errors raised by adversaries.
#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("malformed cost file {path}: {message}")]
    Format { path: String, message: String },
    #[error("parameter violation: {0}")]
    ParameterViolation(String),
    #[error("invalid adversary specification '{0}'")]
    Spec(String),
    #[error("cost sequence has {available} episodes but episode {requested} was requested")]
    Exhausted { available: usize, requested: usize },
}

/// Public information available to the adversary before episode `k`.
#[derive(Clone, Debug, Default)]
pub struct History {
    /// Visit counts `N_j` of every finished episode.
    pub visits: Vec<Vec<u64>>,
    /// Costs revealed to the learner after every finished episode (`None`
    /// for pairs that stayed hidden under bandit feedback).
    pub revealed: Vec<Vec<Option<f64>>>,
}

impl History {
    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn push(&mut self, visits: Vec<u64>, revealed: Vec<Option<f64>>) {
        self.visits.push(visits);
        self.revealed.push(revealed);
    }
}

/// A per-episode cost generator.
pub trait Adversary: Send {
    /// Cost function of episode `episode` (0-based).
    fn cost(&mut self, episode: usize, history: &History) -> Result<CostFunction, AdversaryError>;

    /// Whether the adversary reads the history.
    fn is_adaptive(&self) -> bool {
        false
    }

    /// Hitting time of the instance's intended optimal policy plus one, when
    /// the adversary knows it (lower-bound instances).
    fn budget_hint(&self) -> Option<f64> {
        None
    }
}

/// Parsed adversary specification string.
#[derive(Clone, Debug, PartialEq)]
pub enum AdversarySpec {
    /// `constant:V`
    Constant(f64),
    /// `random:SEED` — i.i.d. uniform costs.
    Random(u64),
    /// `alternating:SEED` — two random cost functions, alternating.
    Alternating(u64),
    /// `file:PATH` — a finite sequence, one entry per episode.
    File(PathBuf),
    /// `cycle:PATH` — a sequence repeated periodically.
    Cycle(PathBuf),
    /// `lowerbound:PATH` — a cost law written by the `lowerbound` command.
    LowerBound(PathBuf),
    /// `follow-learner` — last episode's normalised visit frequencies.
    FollowLearner,
}

impl FromStr for AdversarySpec {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AdversaryError::Spec(s.to_string());
        if s == "follow-learner" {
            return Ok(AdversarySpec::FollowLearner);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(err)?;
        Ok(match kind {
            "constant" => {
                let v: f64 = arg.parse().map_err(|_| err())?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(AdversaryError::InvalidCost(format!("constant {v} outside [0,1]")));
                }
                AdversarySpec::Constant(v)
            }
            "random" => AdversarySpec::Random(arg.parse().map_err(|_| err())?),
            "alternating" => AdversarySpec::Alternating(arg.parse().map_err(|_| err())?),
            "file" => AdversarySpec::File(arg.into()),
            "cycle" => AdversarySpec::Cycle(arg.into()),
            "lowerbound" => AdversarySpec::LowerBound(arg.into()),
            _ => return Err(err()),
        })
    }
}

impl std::fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdversarySpec::Constant(v) => write!(f, "constant:{v}"),
            AdversarySpec::Random(s) => write!(f, "random:{s}"),
            AdversarySpec::Alternating(s) => write!(f, "alternating:{s}"),
            AdversarySpec::File(p) => write!(f, "file:{}", p.display()),
            AdversarySpec::Cycle(p) => write!(f, "cycle:{}", p.display()),
            AdversarySpec::LowerBound(p) => write!(f, "lowerbound:{}", p.display()),
            AdversarySpec::FollowLearner => f.write_str("follow-learner"),
        }
    }
}

/// Loaded form of a specification, shared read-only by all trials.
#[derive(Clone, Debug)]
pub enum AdversarySource {
    Constant(f64),
    Random(u64),
    Alternating(u64),
    Sequence { costs: Vec<CostFunction>, cyclic: bool },
    Law(CostLaw),
    FollowLearner,
}

impl AdversarySource {
    /// Loads any files referenced by the specification.
    pub fn load(spec: &AdversarySpec, mdp: &SspMdp) -> Result<Self, AdversaryError> {
        Ok(match spec {
            AdversarySpec::Constant(v) => AdversarySource::Constant(*v),
            AdversarySpec::Random(s) => AdversarySource::Random(*s),
            AdversarySpec::Alternating(s) => AdversarySource::Alternating(*s),
            AdversarySpec::File(p) => AdversarySource::Sequence { costs: load_cost_sequence(mdp, p)?, cyclic: false },
            AdversarySpec::Cycle(p) => AdversarySource::Sequence { costs: load_cost_sequence(mdp, p)?, cyclic: true },
            AdversarySpec::LowerBound(p) => AdversarySource::Law(CostLaw::load(mdp, p)?),
            AdversarySpec::FollowLearner => AdversarySource::FollowLearner,
        })
    }

    /// Instantiates the adversary for one trial. Stochastic sources draw
    /// from a stream that depends on the trial index, so trials see
    /// independent cost realisations.
    pub fn instantiate(&self, mdp: &SspMdp, trial: u64) -> Result<Box<dyn Adversary>, AdversaryError> {
        Ok(match self {
            AdversarySource::Constant(v) => Box::new(Constant::new(mdp, *v)?),
            AdversarySource::Random(s) => Box::new(UniformRandom::new(mdp.num_pairs(), *s, trial)),
            AdversarySource::Alternating(s) => Box::new(Alternating::random(mdp.num_pairs(), *s)),
            AdversarySource::Sequence { costs, cyclic } => Box::new(Sequence::new(costs.clone(), *cyclic)),
            AdversarySource::Law(law) => Box::new(LawAdversary::new(law.clone(), trial)),
            AdversarySource::FollowLearner => Box::new(FollowLearner::new(mdp.num_pairs())),
        })
    }

    pub fn budget_hint(&self) -> Option<f64> {
        match self {
            AdversarySource::Law(law) => law.budget_hint,
            _ => None,
        }
    }
}
