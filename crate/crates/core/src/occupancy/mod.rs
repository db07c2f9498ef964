//! Occupancy measures: evaluation of stationary policies, the polytope
//! `Δ(T)` of occupancy measures with total mass at most `T`, and the
//! loop-free layered reduction used by the skewed and bandit learners.

mod flat;
mod layered;
mod polytope;

use thiserror::Error;

use crate::mdp::MdpError;

pub use flat::{flow_residual, membership_residual, occupancy_of_policy, policy_of_occupancy, FlatPolytope};
pub use layered::{
    simulate_layered, skew, unskew, GroupKind, LayeredCounts, LayeredPolicy, LoopFree, SigmaPolicy,
};
pub use polytope::LinearPolytope;

/// Errors raised while building or evaluating occupancy measures.
#[derive(Debug, Error)]
pub enum OccupancyError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("singular flow system")]
    Singular,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}
