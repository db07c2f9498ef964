//! Exact policy evaluation (hitting times, costs-to-go), the fast policy and
//! diameter, and the best fixed policy in hindsight.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{CostFunction, MdpError, SspMdp, StationaryPolicy, Successor};
use crate::linalg::lu_solve;

/// Sup-norm change below which value iteration stops.
pub const VALUE_ITERATION_TOLERANCE: f64 = 1e-10;
/// Iteration cap for value iteration.
pub const VALUE_ITERATION_CAP: usize = 1_000_000;
/// Per-step cost added when searching for the best fixed policy, so that
/// zero-cost cycles cannot be optimal. It is removed again when reporting.
pub const BEST_FIXED_PERTURBATION: f64 = 1e-9;
/// Relative tolerance used to declare two action values tied.
const TIE_TOLERANCE: f64 = 1e-12;
/// Policy-evaluation results above this are treated as numerically improper.
const EVALUATION_LIMIT: f64 = 1e13;

/// Checks properness combinatorially: every state must reach the goal
/// through transitions the policy uses with positive probability.
pub fn check_proper(mdp: &SspMdp, policy: &StationaryPolicy) -> Result<(), MdpError> {
    let n = mdp.num_states();
    let mut reaches = vec![false; n];
    let mut changed = true;
    while changed {
        changed = false;
        for p in mdp.pairs() {
            let s = mdp.pair_state(p);
            if reaches[s.0] || policy.prob(p) <= 0.0 {
                continue;
            }
            let ok = mdp.transitions(p).iter().any(|t| match t.next {
                Successor::Goal => true,
                Successor::State(x) => reaches[x.0],
            });
            if ok {
                reaches[s.0] = true;
                changed = true;
            }
        }
    }
    match reaches.iter().position(|r| !r) {
        None => Ok(()),
        Some(s) => Err(MdpError::ImproperPolicy(format!(
            "the goal is unreachable from `{}`",
            mdp.state_name(super::StateId(s))
        ))),
    }
}

/// `I − P_π` restricted to non-goal states.
fn evaluation_matrix(mdp: &SspMdp, policy: &StationaryPolicy) -> DMatrix<f64> {
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
                a[(s, x.0)] -= w * t.prob;
            }
        }
    }
    a
}

/// Solves `(I − P_π) x = Σ_a π(a|s) r(s,a)` for a proper policy.
fn evaluate(mdp: &SspMdp, policy: &StationaryPolicy, pair_reward: &[f64]) -> Result<Vec<f64>, MdpError> {
    check_proper(mdp, policy)?;
    let a = evaluation_matrix(mdp, policy);
    let mut rhs = DVector::zeros(mdp.num_states());
    for p in mdp.pairs() {
        rhs[mdp.pair_state(p).0] += policy.prob(p) * pair_reward[p.0];
    }
    let x = lu_solve(a.clone(), &rhs)
        .ok_or_else(|| MdpError::ImproperPolicy("singular evaluation system".into()))?;
    let scale = x.amax().max(1.0);
    if scale > EVALUATION_LIMIT {
        return Err(MdpError::ImproperPolicy(format!("evaluation diverges ({scale:e})")));
    }
    let residual = (&a * &x - &rhs).amax();
    if residual > 1e-6 * scale {
        return Err(MdpError::Numerical(format!("evaluation residual {residual:e}")));
    }
    Ok(x.iter().copied().collect())
}

/// Expected number of steps to the goal from every state, `(I − P_π) T = 1`.
pub fn compute_hitting_times(mdp: &SspMdp, policy: &StationaryPolicy) -> Result<Vec<f64>, MdpError> {
    evaluate(mdp, policy, &vec![1.0; mdp.num_pairs()])
}

/// Expected cost-to-go from every state, `J = c_π + P_π J`.
pub fn compute_cost_to_go(
    mdp: &SspMdp,
    policy: &StationaryPolicy,
    cost: &[f64],
) -> Result<Vec<f64>, MdpError> {
    assert_eq!(cost.len(), mdp.num_pairs());
    evaluate(mdp, policy, cost)
}

/// `Q(s,a) = cost(s,a) + Σ_{s'} P(s'|s,a) V(s')` with `V(goal) = 0`.
fn q_value(mdp: &SspMdp, cost: &[f64], values: &[f64], p: super::PairId) -> f64 {
    cost[p.0]
        + mdp
            .transitions(p)
            .iter()
            .map(|t| match t.next {
                Successor::Goal => 0.0,
                Successor::State(x) => t.prob * values[x.0],
            })
            .sum::<f64>()
}

/// Action position minimising `Q` at every state, lowest index on ties.
fn greedy(mdp: &SspMdp, cost: &[f64], values: &[f64]) -> Vec<usize> {
    mdp.states()
        .map(|s| {
            let qs: Vec<f64> = mdp.pairs_of(s).map(|p| q_value(mdp, cost, values, p)).collect();
            let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = TIE_TOLERANCE * min.abs().max(1.0);
            qs.iter().position(|q| *q <= min + tol).unwrap_or(0)
        })
        .collect()
}

/// Result of solving a control problem exactly.
#[derive(Clone, Debug)]
struct ControlSolution {
    actions: Vec<usize>,
    values: Vec<f64>,
    vi_iterations: usize,
}

/// Minimises expected total cost with strictly positive per-pair costs:
/// value iteration from zero to the stated tolerance, then policy iteration
/// to remove the residual value-iteration error. Ties go to the lowest
/// action index.
fn solve_control(mdp: &SspMdp, cost: &[f64]) -> Result<ControlSolution, MdpError> {
    if let Some(s) = mdp.states_unable_to_reach_goal().first() {
        return Err(MdpError::NoProperPolicy(format!(
            "state `{}` cannot reach the goal",
            mdp.state_name(*s)
        )));
    }
    let mut values = vec![0.0; mdp.num_states()];
    let mut next = values.clone();
    let mut converged = false;
    let mut vi_iterations = 0;
    while vi_iterations < VALUE_ITERATION_CAP {
        vi_iterations += 1;
        let mut delta: f64 = 0.0;
        for s in mdp.states() {
            let v = mdp
                .pairs_of(s)
                .map(|p| q_value(mdp, cost, &values, p))
                .fold(f64::INFINITY, f64::min);
            delta = delta.max((v - values[s.0]).abs());
            next[s.0] = v;
        }
        std::mem::swap(&mut values, &mut next);
        if delta < VALUE_ITERATION_TOLERANCE {
            converged = true;
            break;
        }
        if !delta.is_finite() || values.iter().any(|v| *v > EVALUATION_LIMIT) {
            break;
        }
    }
    if !converged {
        return Err(MdpError::NoProperPolicy(format!(
            "value iteration did not converge within {vi_iterations} iterations"
        )));
    }

    let mut actions = greedy(mdp, cost, &values);
    let mut policy = StationaryPolicy::deterministic(mdp, &actions);
    let mut values = match evaluate(mdp, &policy, cost) {
        Ok(v) => v,
        Err(_) => {
            return Err(MdpError::NoProperPolicy(
                "greedy policy of converged value iteration is improper".into(),
            ))
        }
    };
    // Policy iteration: switch only on a strict improvement.
    for _ in 0..10_000 {
        let mut changed = false;
        for s in mdp.states() {
            let qs: Vec<f64> = mdp.pairs_of(s).map(|p| q_value(mdp, cost, &values, p)).collect();
            let min = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = TIE_TOLERANCE * min.abs().max(1.0);
            if qs[actions[s.0]] > min + tol {
                actions[s.0] = qs.iter().position(|q| *q <= min + tol).unwrap_or(0);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        policy = StationaryPolicy::deterministic(mdp, &actions);
        values = evaluate(mdp, &policy, cost)?;
    }
    // Canonical tie-breaking among optimal actions.
    let canonical = greedy(mdp, cost, &values);
    if canonical != actions {
        let cand = StationaryPolicy::deterministic(mdp, &canonical);
        if let Ok(v) = evaluate(mdp, &cand, cost) {
            let same = v.iter().zip(&values).all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
            if same {
                actions = canonical;
                values = v;
            }
        }
    }
    Ok(ControlSolution { actions, values, vi_iterations })
}

/// The fast policy `π^f` (minimal expected hitting time from every state)
/// together with its hitting times and the diameter `D = max_s T^{π^f}(s)`.
#[derive(Clone, Debug, Serialize)]
pub struct FastPolicy {
    pub actions: Vec<usize>,
    #[serde(skip)]
    pub policy: StationaryPolicy,
    pub hitting_times: Vec<f64>,
    pub diameter: f64,
    pub value_iterations: usize,
}

impl FastPolicy {
    /// `T^{π^f}(s0)`.
    pub fn initial_hitting_time(&self, mdp: &SspMdp) -> f64 {
        self.hitting_times[mdp.initial().0]
    }
}

/// Computes the fast policy by value iteration with unit costs.
pub fn compute_fast_policy(mdp: &SspMdp) -> Result<FastPolicy, MdpError> {
    let sol = solve_control(mdp, &vec![1.0; mdp.num_pairs()])?;
    let diameter = sol.values.iter().copied().fold(0.0, f64::max);
    Ok(FastPolicy {
        policy: StationaryPolicy::deterministic(mdp, &sol.actions),
        actions: sol.actions,
        hitting_times: sol.values,
        diameter,
        value_iterations: sol.vi_iterations,
    })
}

/// The best fixed deterministic policy in hindsight.
#[derive(Clone, Debug)]
pub struct BestFixed {
    pub actions: Vec<usize>,
    pub policy: StationaryPolicy,
    /// `Σ_k J_k^{π*}(s0)` under the unperturbed costs.
    pub total_cost: f64,
    /// `T^{π*}(s0)`.
    pub hitting_time: f64,
}

/// Best fixed policy for the summed costs `Σ_k c_k` over `episodes` episodes.
pub fn best_fixed_policy_for_total(
    mdp: &SspMdp,
    total: &[f64],
    episodes: usize,
) -> Result<BestFixed, MdpError> {
    assert_eq!(total.len(), mdp.num_pairs());
    let k = episodes.max(1) as f64;
    let perturbed: Vec<f64> = total.iter().map(|c| c / k + BEST_FIXED_PERTURBATION).collect();
    let sol = solve_control(mdp, &perturbed)?;
    let policy = StationaryPolicy::deterministic(mdp, &sol.actions);
    let s0 = mdp.initial().0;
    let total_cost = compute_cost_to_go(mdp, &policy, total)?[s0];
    let hitting_time = compute_hitting_times(mdp, &policy)?[s0];
    Ok(BestFixed { actions: sol.actions, policy, total_cost, hitting_time })
}

/// Best fixed policy for a realised cost sequence, returning
/// `min_π Σ_k J_k^π(s0)` over proper deterministic policies.
pub fn best_fixed_policy(mdp: &SspMdp, costs: &[CostFunction]) -> Result<BestFixed, MdpError> {
    let mut total = vec![0.0; mdp.num_pairs()];
    for c in costs {
        for (t, v) in total.iter_mut().zip(c.as_slice()) {
            *t += v;
        }
    }
    best_fixed_policy_for_total(mdp, &total, costs.len())
}
