//! Solvers for the Bregman steps behind every mirror-descent update.
//!
//! * [`entropy`] — weighted negative-entropy steps over a polytope (dual
//!   Newton on the equality and budget multipliers);
//! * [`barrier`] — log-barrier steps on per-pair aggregates of a layered
//!   occupancy (primal interior-point Newton);
//! * [`simplex`] — multi-rate exponential weights on the probability simplex;
//! * [`audit`] — an optimality audit comparing a solution against feasible
//!   competitors.

pub mod audit;
pub mod barrier;
pub mod entropy;
pub mod simplex;

pub use audit::{audit_minimiser, AuditReport};
pub use barrier::{BarrierSolution, LogBarrierProjection};
pub use entropy::{DualPoint, EntropyProjection, EntropySolution};
pub use simplex::multi_rate_exponential_weights;

use serde::Serialize;
use thiserror::Error;

/// Errors raised by the step solvers.
#[derive(Debug, Error)]
pub enum OmdError {
    #[error("invalid solver input: {0}")]
    Parameter(String),
    #[error("solver did not reach the KKT tolerance after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("the floor constraints leave no feasible point: {0}")]
    InfeasibleFloor(String),
}

/// Tolerances and limits shared by the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Largest accepted KKT residual of a returned solution.
    pub kkt_tolerance: f64,
    /// Stopping tolerance of the inner Newton iterations.
    pub inner_tolerance: f64,
    /// Iteration cap of a full solve.
    pub max_iterations: usize,
    /// Iteration cap of a warm-started attempt before falling back to path
    /// following.
    pub warm_iterations: usize,
    /// Selection barrier weight of the log-barrier solver.
    pub barrier: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tolerance: 1e-8,
            inner_tolerance: 1e-11,
            max_iterations: 10_000,
            warm_iterations: 100,
            barrier: 1e-10,
        }
    }
}

/// Per-solve statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    /// Newton (or ascent) iterations.
    pub iterations: usize,
    /// Steps that fell back from Newton to a first-order direction.
    pub fallback_steps: usize,
    /// Warm starts abandoned in favour of path following.
    pub restarts: usize,
    /// `‖Ax − b‖_∞` at the returned point.
    pub primal_residual: f64,
    /// Combined KKT residual at the returned point.
    pub kkt_residual: f64,
}
