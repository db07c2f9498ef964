//! Stationary randomized policies and per-episode cost functions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MdpError, PairId, SspMdp, StateId};

/// A stationary randomized policy stored as one probability per pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    probs: Vec<f64>,
}

impl StationaryPolicy {
    /// Deterministic policy playing `actions[s]` (an action position) at `s`.
    pub fn deterministic(mdp: &SspMdp, actions: &[usize]) -> Self {
        assert_eq!(actions.len(), mdp.num_states(), "one action per state");
        let mut probs = vec![0.0; mdp.num_pairs()];
        for s in mdp.states() {
            probs[mdp.pair(s, actions[s.0]).0] = 1.0;
        }
        StationaryPolicy { probs }
    }

    /// The uniform policy.
    pub fn uniform(mdp: &SspMdp) -> Self {
        let probs = mdp.pairs().map(|p| 1.0 / mdp.num_actions(mdp.pair_state(p)) as f64).collect();
        StationaryPolicy { probs }
    }

    /// Normalises non-negative per-pair weights state by state. A state whose
    /// weights sum below `1e-300` gets the uniform distribution.
    pub fn from_pair_weights(mdp: &SspMdp, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), mdp.num_pairs());
        let mut probs = vec![0.0; mdp.num_pairs()];
        for s in mdp.states() {
            let total: f64 = mdp.pairs_of(s).map(|p| weights[p.0].max(0.0)).sum();
            let n = mdp.num_actions(s) as f64;
            for p in mdp.pairs_of(s) {
                probs[p.0] = if total < 1e-300 { 1.0 / n } else { weights[p.0].max(0.0) / total };
            }
        }
        StationaryPolicy { probs }
    }

    /// Builds a policy from explicit probabilities, checking every row.
    pub fn from_probs(mdp: &SspMdp, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != mdp.num_pairs() {
            return Err(MdpError::Invalid("policy length differs from |Γ|".into()));
        }
        for s in mdp.states() {
            let total: f64 = mdp.pairs_of(s).map(|p| probs[p.0]).sum();
            let bad = mdp.pairs_of(s).any(|p| !(0.0..=1.0).contains(&probs[p.0]));
            if bad || (total - 1.0).abs() > 1e-9 {
                return Err(MdpError::Invalid(format!(
                    "policy row at `{}` is not a distribution",
                    mdp.state_name(s)
                )));
            }
        }
        Ok(StationaryPolicy { probs })
    }

    /// `π(a|s)` for the pair `(s,a)`.
    pub fn prob(&self, p: PairId) -> f64 {
        self.probs[p.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Samples an action position at `s`.
    pub fn sample_action<R: Rng + ?Sized>(&self, mdp: &SspMdp, s: StateId, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in mdp.pairs_of(s).enumerate() {
            let w = self.probs[p.0];
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// The most likely action at each state (lowest index on ties).
    pub fn greedy_actions(&self, mdp: &SspMdp) -> Vec<usize> {
        mdp.states()
            .map(|s| {
                let mut best = 0;
                for (i, p) in mdp.pairs_of(s).enumerate() {
                    if self.probs[p.0] > self.probs[mdp.pair(s, best).0] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// A cost function `c: Γ → [0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostFunction(Vec<f64>);

impl CostFunction {
    /// Wraps per-pair costs, rejecting values outside `[0,1]`.
    pub fn new(values: Vec<f64>) -> Result<Self, MdpError> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MdpError::Invalid(format!("cost {v} is outside [0,1]")));
        }
        Ok(CostFunction(values))
    }

    /// Constant cost on every pair.
    pub fn constant(mdp: &SspMdp, value: f64) -> Result<Self, MdpError> {
        Self::new(vec![value; mdp.num_pairs()])
    }

    pub fn zeros(n: usize) -> Self {
        CostFunction(vec![0.0; n])
    }

    pub fn get(&self, p: PairId) -> f64 {
        self.0[p.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `⟨x, c⟩` for a per-pair vector `x`.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}
