//! The loop-free layered reduction, its occupancy polytope, and the rule
//! that executes a layered policy in the original MDP.
//!
//! Layers `1..=H1` copy the original dynamics (pairs at `(s,h)` exist only
//! when `(s,h)` is reachable from `(s0,1)`). From every state at layer `H1`
//! the episode moves to an artificial fast state `s_f`, which then walks
//! through layers `H1+1..=H` (`H = H1 + H2`) with cost 1 per layer before
//! reaching the goal. The occupancy of `(s_f, a_f, h)` is the same for every
//! `h > H1` — the mass still in play at layer `H1` — so it is stored as one
//! variable `m` together with the linking row `m = Σ q(·,·,H1)`.

use std::collections::VecDeque;

use rand::Rng;

use super::{LinearPolytope, OccupancyError};
use crate::mdp::{
    simulate_episode_observed, ActionSource, CostFunction, EpisodeTrace, PairId, SimulationOptions,
    SspMdp, StateId, StationaryPolicy, Successor,
};

const NO_VAR: usize = usize::MAX;

/// One aggregation group of the layered problem: an original pair, or the
/// fast pair `(s_f, a_f)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Pair(PairId),
    Fast,
}

/// The layered reduction of an SSP for horizons `H1` and `H2`.
#[derive(Clone, Debug)]
pub struct LoopFree {
    h1: usize,
    h2: usize,
    num_pairs: usize,
    /// `var_at[(h-1) * |Γ| + p]`, `NO_VAR` when `(s,h)` is unreachable.
    var_at: Vec<usize>,
    var_pair: Vec<PairId>,
    var_layer: Vec<usize>,
    layer_start: Vec<usize>,
    fast_var: Option<usize>,
    /// Reachability of `(s,h)`, `reach[(h-1) * |S| + s]`.
    reach: Vec<bool>,
    num_states: usize,
    groups: Vec<Vec<usize>>,
    group_kind: Vec<GroupKind>,
    group_of_var: Vec<usize>,
}

impl LoopFree {
    /// Builds the reduction, pruning layered states that cannot be reached
    /// within `H1` steps.
    pub fn new(mdp: &SspMdp, h1: usize, h2: usize) -> Result<Self, OccupancyError> {
        if h1 == 0 {
            return Err(OccupancyError::Parameter("H1 must be at least 1".into()));
        }
        let (ns, np) = (mdp.num_states(), mdp.num_pairs());
        let mut reach = vec![false; h1 * ns];
        reach[mdp.initial().0] = true;
        let mut frontier = VecDeque::from([mdp.initial()]);
        for h in 1..h1 {
            let mut next = VecDeque::new();
            while let Some(s) = frontier.pop_front() {
                for p in mdp.pairs_of(s) {
                    for t in mdp.transitions(p) {
                        if let Successor::State(x) = t.next {
                            let idx = h * ns + x.0;
                            if !reach[idx] {
                                reach[idx] = true;
                                next.push_back(x);
                            }
                        }
                    }
                }
            }
            frontier = next;
        }

        let mut var_at = vec![NO_VAR; h1 * np];
        let mut var_pair = Vec::new();
        let mut var_layer = Vec::new();
        let mut layer_start = Vec::with_capacity(h1 + 1);
        for h in 1..=h1 {
            layer_start.push(var_pair.len());
            for s in mdp.states() {
                if !reach[(h - 1) * ns + s.0] {
                    continue;
                }
                for p in mdp.pairs_of(s) {
                    var_at[(h - 1) * np + p.0] = var_pair.len();
                    var_pair.push(p);
                    var_layer.push(h);
                }
            }
        }
        layer_start.push(var_pair.len());
        let has_last_layer = layer_start[h1] > layer_start[h1 - 1];
        let fast_var = has_last_layer.then_some(var_pair.len());

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_kind = Vec::new();
        let mut group_of_pair = vec![NO_VAR; np];
        let n_layer_vars = var_pair.len();
        let mut group_of_var = vec![0; n_layer_vars + fast_var.map_or(0, |_| 1)];
        for (i, p) in var_pair.iter().enumerate() {
            if group_of_pair[p.0] == NO_VAR {
                group_of_pair[p.0] = groups.len();
                groups.push(Vec::new());
                group_kind.push(GroupKind::Pair(*p));
            }
            let g = group_of_pair[p.0];
            groups[g].push(i);
            group_of_var[i] = g;
        }
        if let Some(f) = fast_var {
            group_of_var[f] = groups.len();
            groups.push(vec![f]);
            group_kind.push(GroupKind::Fast);
        }

        Ok(LoopFree {
            h1,
            h2,
            num_pairs: np,
            var_at,
            var_pair,
            var_layer,
            layer_start,
            fast_var,
            reach,
            num_states: ns,
            groups,
            group_kind,
            group_of_var,
        })
    }

    pub fn h1(&self) -> usize {
        self.h1
    }

    pub fn h2(&self) -> usize {
        self.h2
    }

    /// `H = H1 + H2`.
    pub fn horizon(&self) -> usize {
        self.h1 + self.h2
    }

    /// Number of variables, including the fast-state mass `m` if present.
    pub fn num_vars(&self) -> usize {
        self.var_pair.len() + self.fast_var.map_or(0, |_| 1)
    }

    /// Number of `(s,a,h)` variables with `h ≤ H1`.
    pub fn num_layer_vars(&self) -> usize {
        self.var_pair.len()
    }

    /// Index of the fast-state mass variable `m`.
    pub fn fast_var(&self) -> Option<usize> {
        self.fast_var
    }

    /// Variable of `(s,a,h)` for `h ≤ H1`.
    pub fn var(&self, p: PairId, h: usize) -> Option<usize> {
        if h == 0 || h > self.h1 {
            return None;
        }
        let v = self.var_at[(h - 1) * self.num_pairs + p.0];
        (v != NO_VAR).then_some(v)
    }

    /// Pair of a layer variable.
    pub fn var_pair(&self, i: usize) -> PairId {
        self.var_pair[i]
    }

    /// Layer of a layer variable.
    pub fn var_layer(&self, i: usize) -> usize {
        self.var_layer[i]
    }

    /// Whether `(s,h)` is reachable (for `h ≤ H1`).
    pub fn is_reachable(&self, s: StateId, h: usize) -> bool {
        h >= 1 && h <= self.h1 && self.reach[(h - 1) * self.num_states + s.0]
    }

    /// Layer variables of layer `h`.
    pub fn layer_vars(&self, h: usize) -> std::ops::Range<usize> {
        self.layer_start[h - 1]..self.layer_start[h]
    }

    /// Aggregation groups (pairs of `Γ̃` with at least one variable, then the
    /// fast pair).
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_kind(&self, g: usize) -> GroupKind {
        self.group_kind[g]
    }

    pub fn group_of_var(&self, i: usize) -> usize {
        self.group_of_var[i]
    }

    /// Weight of each variable in `Σ q`: 1 for layer variables and `H2` for
    /// the fast mass (it stands for `H2` layered coordinates).
    pub fn mass_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0; self.num_vars()];
        if let Some(f) = self.fast_var {
            w[f] = self.h2 as f64;
        }
        w
    }

    /// Skew weights `1 + λh`; the fast mass gets `Σ_{h=H1+1}^{H} (1 + λh)`.
    pub fn skew_weights(&self, lambda: f64) -> Vec<f64> {
        let mut w: Vec<f64> = self.var_layer.iter().map(|h| 1.0 + lambda * *h as f64).collect();
        if self.fast_var.is_some() {
            w.push(self.fast_chain_weight(lambda));
        }
        w
    }

    /// `Σ_{h=H1+1}^{H} (1 + λh)`.
    pub fn fast_chain_weight(&self, lambda: f64) -> f64 {
        (self.h1 + 1..=self.horizon()).map(|h| 1.0 + lambda * h as f64).sum()
    }

    /// `Σ_{h=H1+1}^{H} h`, the layer-weighted size of the fast chain.
    pub fn fast_chain_layer_sum(&self) -> f64 {
        (self.h1 + 1..=self.horizon()).map(|h| h as f64).sum()
    }

    /// The layered polytope `Δ̃(T)` with the fast coordinates substituted.
    pub fn polytope(&self, mdp: &SspMdp, budget: f64) -> Result<LinearPolytope, OccupancyError> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(OccupancyError::Parameter(format!("budget T = {budget} must be positive")));
        }
        let ns = self.num_states;
        let mut row_of = vec![NO_VAR; self.h1 * ns];
        let mut rows = 0;
        for (idx, r) in self.reach.iter().enumerate() {
            if *r {
                row_of[idx] = rows;
                rows += 1;
            }
        }
        let link_row = self.fast_var.map(|_| {
            rows += 1;
            rows - 1
        });
        let mut cols = Vec::with_capacity(self.num_vars());
        for (i, p) in self.var_pair.iter().enumerate() {
            let h = self.var_layer[i];
            let s = mdp.pair_state(*p);
            let mut col = vec![(row_of[(h - 1) * ns + s.0], 1.0)];
            if h < self.h1 {
                for t in mdp.transitions(*p) {
                    if let Successor::State(x) = t.next {
                        let r = row_of[h * ns + x.0];
                        match col.iter_mut().find(|(row, _)| *row == r) {
                            Some(e) => e.1 -= t.prob,
                            None => col.push((r, -t.prob)),
                        }
                    }
                }
            } else if let Some(l) = link_row {
                col.push((l, -1.0));
            }
            cols.push(col);
        }
        if let Some(l) = link_row {
            cols.push(vec![(l, 1.0)]);
        }
        let mut rhs = vec![0.0; rows];
        rhs[row_of[mdp.initial().0]] = 1.0;
        Ok(LinearPolytope::new(cols, rhs, self.mass_weights(), budget))
    }

    /// Occupancy of a layered policy in the layered MDP (forward pass).
    pub fn occupancy_of(&self, mdp: &SspMdp, policy: &LayeredPolicy) -> Vec<f64> {
        let ns = self.num_states;
        let mut x = vec![0.0; self.num_vars()];
        let mut d = vec![0.0; ns];
        d[mdp.initial().0] = 1.0;
        for h in 1..=self.h1 {
            let mut next = vec![0.0; ns];
            for i in self.layer_vars(h) {
                let p = self.var_pair[i];
                let s = mdp.pair_state(p);
                x[i] = d[s.0] * policy.probs[i];
                if h < self.h1 {
                    for t in mdp.transitions(p) {
                        if let Successor::State(n) = t.next {
                            next[n.0] += t.prob * x[i];
                        }
                    }
                }
            }
            d = next;
        }
        if let Some(f) = self.fast_var {
            x[f] = self.layer_vars(self.h1).map(|i| x[i]).sum();
        }
        x
    }

    /// `π̃(a|s,h) ∝ q(s,a,h)`; layered states with (numerically) zero mass
    /// get the uniform distribution.
    pub fn policy_of(&self, mdp: &SspMdp, q: &[f64]) -> LayeredPolicy {
        let mut probs = vec![0.0; self.num_layer_vars()];
        for h in 1..=self.h1 {
            let range = self.layer_vars(h);
            let mut i = range.start;
            while i < range.end {
                let s = mdp.pair_state(self.var_pair[i]);
                let n = mdp.num_actions(s);
                let total: f64 = (i..i + n).map(|j| q[j].max(0.0)).sum();
                for j in i..i + n {
                    probs[j] = if total < 1e-300 { 1.0 / n as f64 } else { q[j].max(0.0) / total };
                }
                i += n;
            }
        }
        LayeredPolicy { probs }
    }

    /// The layered copy of a stationary policy.
    pub fn lift(&self, policy: &StationaryPolicy) -> LayeredPolicy {
        LayeredPolicy { probs: self.var_pair.iter().map(|p| policy.prob(*p)).collect() }
    }

    /// Uniform layered policy.
    pub fn uniform(&self, mdp: &SspMdp) -> LayeredPolicy {
        self.lift(&StationaryPolicy::uniform(mdp))
    }

    /// Random layered policy with i.i.d. exponential action weights.
    pub fn random_policy<R: Rng + ?Sized>(&self, mdp: &SspMdp, rng: &mut R) -> LayeredPolicy {
        let w: Vec<f64> = (0..self.num_layer_vars()).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        self.policy_of(mdp, &w)
    }

    /// Layered policy minimising the total mass `Σ q` (unit cost per layer
    /// and `H2` extra for reaching layer `H1`), by backward induction.
    pub fn fastest_policy(&self, mdp: &SspMdp) -> LayeredPolicy {
        let ns = self.num_states;
        let mut probs = vec![0.0; self.num_layer_vars()];
        let mut v_next = vec![0.0; ns];
        for h in (1..=self.h1).rev() {
            let mut v = vec![0.0; ns];
            for s in mdp.states() {
                if !self.is_reachable(s, h) {
                    continue;
                }
                let mut best = (f64::INFINITY, 0);
                for (a, p) in mdp.pairs_of(s).enumerate() {
                    let q = if h == self.h1 {
                        1.0 + self.h2 as f64
                    } else {
                        1.0 + mdp
                            .transitions(p)
                            .iter()
                            .map(|t| match t.next {
                                Successor::Goal => 0.0,
                                Successor::State(n) => t.prob * v_next[n.0],
                            })
                            .sum::<f64>()
                    };
                    if q < best.0 - 1e-12 {
                        best = (q, a);
                    }
                }
                v[s.0] = best.0;
                probs[self.var(mdp.pair(s, best.1), h).expect("reachable")] = 1.0;
            }
            v_next = v;
        }
        LayeredPolicy { probs }
    }

    /// Lifted cost `c̃`: `c(s,a)` on layer variables and 1 per fast layer.
    pub fn lifted_cost(&self, cost: &CostFunction) -> Vec<f64> {
        let mut c: Vec<f64> = self.var_pair.iter().map(|p| cost.get(*p)).collect();
        if self.fast_var.is_some() {
            c.push(1.0);
        }
        c
    }

    /// `⟨q, c̃⟩` in the layered MDP.
    pub fn expected_cost(&self, q: &[f64], cost: &CostFunction) -> f64 {
        let c = self.lifted_cost(cost);
        self.mass_weights().iter().zip(q).zip(&c).map(|((w, x), c)| w * x * c).sum()
    }

    /// Per-group unskewed aggregate `q(s,a) = Σ_h q(s,a,h)` (`H2·m` for the
    /// fast pair).
    pub fn aggregate(&self, q: &[f64]) -> Vec<f64> {
        self.aggregate_weighted(q, &self.mass_weights())
    }

    /// Per-group aggregate `Σ_{i∈g} w_i q_i` for arbitrary weights.
    pub fn aggregate_weighted(&self, q: &[f64], weights: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| g.iter().map(|i| weights[*i] * q[*i]).sum()).collect()
    }

    /// Per-group `Σ_h h·q(s,a,h)` (fast pair: `m·Σ_{h>H1} h`).
    pub fn layer_moment(&self, q: &[f64]) -> Vec<f64> {
        let mut w: Vec<f64> = self.var_layer.iter().map(|h| *h as f64).collect();
        if self.fast_var.is_some() {
            w.push(self.fast_chain_layer_sum());
        }
        self.aggregate_weighted(q, &w)
    }

    /// Expands a variable vector into a per-pair aggregate over the original
    /// pairs (fast mass dropped).
    pub fn to_pairs(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_pairs];
        for (i, p) in self.var_pair.iter().enumerate() {
            out[p.0] += q[i];
        }
        out
    }
}

/// Skew map `q̆ = ω ∘ q` for per-variable weights `ω`.
pub fn skew(q: &[f64], weights: &[f64]) -> Vec<f64> {
    q.iter().zip(weights).map(|(q, w)| q * w).collect()
}

/// Inverse of [`skew`].
pub fn unskew(q_skewed: &[f64], weights: &[f64]) -> Vec<f64> {
    q_skewed.iter().zip(weights).map(|(q, w)| q / w).collect()
}

/// A policy on the layered states `(s,h)`, `h ≤ H1`, stored per layer
/// variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredPolicy {
    probs: Vec<f64>,
}

impl LayeredPolicy {
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Executes a layered policy in the original MDP: `π̃(·|s,h)` for steps
/// `h ≤ H1`, then the fast policy until the goal.
pub struct SigmaPolicy<'a> {
    pub loop_free: &'a LoopFree,
    pub layered: &'a LayeredPolicy,
    pub fast: &'a StationaryPolicy,
}

impl ActionSource for SigmaPolicy<'_> {
    fn choose<R: Rng + ?Sized>(&self, mdp: &SspMdp, state: StateId, step: u64, rng: &mut R) -> usize {
        let h = step as usize;
        if h > self.loop_free.h1 {
            return self.fast.sample_action(mdp, state, rng);
        }
        let first = self
            .loop_free
            .var(mdp.pair(state, 0), h)
            .expect("states visited within H1 steps are reachable");
        let n = mdp.num_actions(state);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for a in 0..n {
            let w = self.layered.probs[first + a];
            if w > 0.0 {
                acc += w;
                last = a;
                if u < acc {
                    return a;
                }
            }
        }
        last
    }
}

/// Layered visit indicators `Ñ` recorded while executing a layered policy.
/// Layer variables are 0/1; the fast entry is 1 iff an action was taken at
/// step `H1` (then every fast layer `H1 < h ≤ H` counts one visit).
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredCounts(pub Vec<f64>);

/// Runs one episode of the layered policy in the original MDP and records
/// both the original visit counts and the layered indicators.
pub fn simulate_layered<R: Rng + ?Sized>(
    mdp: &SspMdp,
    loop_free: &LoopFree,
    layered: &LayeredPolicy,
    fast: &StationaryPolicy,
    cost: Option<&CostFunction>,
    rng: &mut R,
    options: SimulationOptions,
) -> (EpisodeTrace, LayeredCounts) {
    let sigma = SigmaPolicy { loop_free, layered, fast };
    let mut counts = vec![0.0; loop_free.num_vars()];
    let trace = simulate_episode_observed(mdp, &sigma, cost, rng, options, |step, p| {
        if let Some(i) = loop_free.var(p, step as usize) {
            counts[i] = 1.0;
        }
    });
    if let Some(f) = loop_free.fast_var {
        if trace.steps >= loop_free.h1 as u64 {
            counts[f] = 1.0;
        }
    }
    (trace, LayeredCounts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{compute_fast_policy, StationaryPolicy};
    use crate::occupancy::occupancy_of_policy;
    use crate::toy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lifted_occupancy_is_feasible_and_sums_layers() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 30, 5).unwrap();
        let pi = StationaryPolicy::uniform(&m);
        let x = lf.occupancy_of(&m, &lf.lift(&pi));
        let poly = lf.polytope(&m, 1e6).unwrap();
        assert!(poly.residual(&x) < 1e-12);
        // With a long first stage the layered occupancy matches the flat one.
        let q = occupancy_of_policy(&m, &pi).unwrap();
        let agg = lf.to_pairs(&x);
        for (a, b) in agg.iter().zip(&q) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn pruning_keeps_only_initial_state_in_first_layer() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 4, 2).unwrap();
        assert_eq!(lf.layer_vars(1).len(), m.num_actions(m.initial()));
        assert!(lf.is_reachable(m.initial(), 1));
        assert!(!lf.is_reachable(StateId(1), 1));
    }

    #[test]
    fn policy_round_trip_and_fast_mass() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pol = lf.random_policy(&m, &mut rng);
        let x = lf.occupancy_of(&m, &pol);
        let back = lf.policy_of(&m, &x);
        for (a, b) in pol.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let f = lf.fast_var().unwrap();
        let layer3: f64 = lf.layer_vars(3).map(|i| x[i]).sum();
        assert!((x[f] - layer3).abs() < 1e-15);
    }

    #[test]
    fn fastest_policy_minimises_total_mass() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 5, 7).unwrap();
        let w = lf.mass_weights();
        let mass = |p: &LayeredPolicy| -> f64 {
            lf.occupancy_of(&m, p).iter().zip(&w).map(|(x, w)| x * w).sum()
        };
        let best = mass(&lf.fastest_policy(&m));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            assert!(best <= mass(&lf.random_policy(&m, &mut rng)) + 1e-12);
        }
        let fast = compute_fast_policy(&m).unwrap();
        assert!(best <= mass(&lf.lift(&fast.policy)) + 1e-12);
    }

    #[test]
    fn sigma_records_fast_indicator_iff_layer_h1_is_reached() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 2, 3).unwrap();
        let fast = compute_fast_policy(&m).unwrap();
        let pol = lf.uniform(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let (tr, n) = simulate_layered(&m, &lf, &pol, &fast.policy, None, &mut rng, Default::default());
            let last: f64 = lf.layer_vars(2).map(|i| n.0[i]).sum();
            assert_eq!(n.0[lf.fast_var().unwrap()], last);
            let ones: f64 = n.0[..lf.num_layer_vars()].iter().sum();
            assert_eq!(ones as u64, tr.steps.min(2));
        }
    }

    #[test]
    fn skew_round_trips() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 3, 2).unwrap();
        let w = lf.skew_weights(0.3);
        let x: Vec<f64> = (0..lf.num_vars()).map(|i| i as f64 * 0.1).collect();
        let back = unskew(&skew(&x, &w), &w);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(lf.skew_weights(0.0), lf.mass_weights());
    }
}
