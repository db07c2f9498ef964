//! Occupancy measures of stationary policies and the polytope `Δ(T)`.

use nalgebra::{DMatrix, DVector};

use super::{LinearPolytope, OccupancyError};
use crate::linalg::lu_solve;
use crate::mdp::{check_proper, PairId, SspMdp, StationaryPolicy, Successor};

/// Occupancy `q_π(s,a)`: expected visits to each pair before the goal.
///
/// Solves `(I − P_π)ᵀ d = e_{s0}` for the state visitation `d` and returns
/// `q(s,a) = d(s) π(a|s)`, indexed by pair.
pub fn occupancy_of_policy(mdp: &SspMdp, policy: &StationaryPolicy) -> Result<Vec<f64>, OccupancyError> {
    check_proper(mdp, policy)?;
    let n = mdp.num_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    for p in mdp.pairs() {
        let w = policy.prob(p);
        if w == 0.0 {
            continue;
        }
        let s = mdp.pair_state(p).0;
        for t in mdp.transitions(p) {
            if let Successor::State(x) = t.next {
                // transpose: row x, column s
                a[(x.0, s)] -= w * t.prob;
            }
        }
    }
    let mut rhs = DVector::zeros(n);
    rhs[mdp.initial().0] = 1.0;
    let d = lu_solve(a, &rhs).ok_or(OccupancyError::Singular)?;
    Ok(mdp.pairs().map(|p| (d[mdp.pair_state(p).0] * policy.prob(p)).max(0.0)).collect())
}

/// `π_q(a|s) = q(s,a) / Σ_b q(s,b)`; states with (numerically) zero mass get
/// the uniform distribution.
pub fn policy_of_occupancy(mdp: &SspMdp, q: &[f64]) -> StationaryPolicy {
    StationaryPolicy::from_pair_weights(mdp, q)
}

/// Flow-conservation residual of a per-pair vector over every state:
/// `max_s |Σ_a q(s,a) − Σ_{s',a'} P(s|s',a') q(s',a') − 1{s = s0}|`.
pub fn flow_residual(mdp: &SspMdp, q: &[f64]) -> f64 {
    let mut balance = vec![0.0; mdp.num_states()];
    balance[mdp.initial().0] = -1.0;
    for p in mdp.pairs() {
        balance[mdp.pair_state(p).0] += q[p.0];
        for t in mdp.transitions(p) {
            if let Successor::State(x) = t.next {
                balance[x.0] -= t.prob * q[p.0];
            }
        }
    }
    balance.iter().map(|b| b.abs()).fold(0.0, f64::max)
}

/// Largest violation of membership in `Δ(T)` (flow, `Σ q ≤ T`, `q ≥ 0`).
pub fn membership_residual(mdp: &SspMdp, q: &[f64], budget: f64) -> f64 {
    let neg = q.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let over = (q.iter().sum::<f64>() - budget).max(0.0);
    flow_residual(mdp, q).max(neg).max(over)
}

/// `Δ(T)` restricted to pairs at states reachable from `s0`; pairs at
/// unreachable states carry zero occupancy under every policy.
#[derive(Clone, Debug)]
pub struct FlatPolytope {
    vars: Vec<PairId>,
    var_of_pair: Vec<Option<usize>>,
    num_pairs: usize,
    linear: LinearPolytope,
}

impl FlatPolytope {
    pub fn new(mdp: &SspMdp, budget: f64) -> Result<Self, OccupancyError> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(OccupancyError::Parameter(format!("budget T = {budget} must be positive")));
        }
        let reachable = mdp.reachable_states();
        let mut row_of_state = vec![None; mdp.num_states()];
        let mut rows = 0;
        for s in mdp.states() {
            if reachable[s.0] {
                row_of_state[s.0] = Some(rows);
                rows += 1;
            }
        }
        let mut vars = Vec::new();
        let mut var_of_pair = vec![None; mdp.num_pairs()];
        let mut cols = Vec::new();
        for p in mdp.pairs() {
            let Some(own) = row_of_state[mdp.pair_state(p).0] else { continue };
            var_of_pair[p.0] = Some(vars.len());
            vars.push(p);
            let mut col = vec![(own, 1.0)];
            for t in mdp.transitions(p) {
                if let Successor::State(x) = t.next {
                    let r = row_of_state[x.0].expect("successors of reachable states are reachable");
                    match col.iter_mut().find(|(row, _)| *row == r) {
                        Some(entry) => entry.1 -= t.prob,
                        None => col.push((r, -t.prob)),
                    }
                }
            }
            cols.push(col);
        }
        let mut rhs = vec![0.0; rows];
        rhs[row_of_state[mdp.initial().0].expect("initial state is reachable")] = 1.0;
        let mass = vec![1.0; vars.len()];
        Ok(FlatPolytope {
            vars,
            var_of_pair,
            num_pairs: mdp.num_pairs(),
            linear: LinearPolytope::new(cols, rhs, mass, budget),
        })
    }

    pub fn linear(&self) -> &LinearPolytope {
        &self.linear
    }

    pub fn budget(&self) -> f64 {
        self.linear.budget()
    }

    /// The pair behind each variable.
    pub fn vars(&self) -> &[PairId] {
        &self.vars
    }

    /// Expands a variable vector to a per-pair vector (zeros elsewhere).
    pub fn to_pairs(&self, x: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.num_pairs];
        for (p, v) in self.vars.iter().zip(x) {
            q[p.0] = *v;
        }
        q
    }

    /// Restricts a per-pair vector to the variables.
    pub fn from_pairs(&self, q: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|p| q[p.0]).collect()
    }

    /// Variable index of a pair, if the pair is at a reachable state.
    pub fn var_of(&self, p: PairId) -> Option<usize> {
        self.var_of_pair[p.0]
    }
}
