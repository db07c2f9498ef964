//! Core model: the SSP instance, stationary policies, cost functions, exact
//! evaluation, planning (fast policy, diameter, best fixed policy) and
//! episode simulation.

mod model;
mod planning;
mod policy;
mod simulate;

use thiserror::Error;

pub use model::{
    MdpDocument, PairId, SspMdp, StateId, Successor, Transition, Validation, ROW_SUM_TOLERANCE,
};
pub use planning::{
    best_fixed_policy, best_fixed_policy_for_total, check_proper, compute_cost_to_go,
    compute_fast_policy, compute_hitting_times, BestFixed, FastPolicy, BEST_FIXED_PERTURBATION,
    VALUE_ITERATION_CAP, VALUE_ITERATION_TOLERANCE,
};
pub use policy::{CostFunction, StationaryPolicy};
pub use simulate::{
    sample_successor, simulate_episode, simulate_episode_observed, ActionSource, EpisodeTrace,
    SimulationOptions, DEFAULT_STEP_CAP,
};

/// Errors raised while loading, planning in, or evaluating an SSP.
#[derive(Debug, Error)]
pub enum MdpError {
    #[error("malformed MDP description: {0}")]
    Parse(String),
    #[error("invalid MDP: {0}")]
    Invalid(String),
    #[error("no proper policy exists: {0}")]
    NoProperPolicy(String),
    #[error("improper policy: {0}")]
    ImproperPolicy(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
