//! Oblivious cost sequences.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Adversary, AdversaryError, History};
use crate::mdp::{CostFunction, SspMdp};

/// The same cost on every pair in every episode.
#[derive(Clone, Debug)]
pub struct Constant(CostFunction);

impl Constant {
    pub fn new(mdp: &SspMdp, value: f64) -> Result<Self, AdversaryError> {
        Ok(Constant(CostFunction::constant(mdp, value)?))
    }
}

impl Adversary for Constant {
    fn cost(&mut self, _episode: usize, _history: &History) -> Result<CostFunction, AdversaryError> {
        Ok(self.0.clone())
    }
}

/// Random stream for `(seed, trial, episode)`.
pub(crate) fn episode_rng(seed: u64, trial: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 32) | episode as u64);
    rng
}

/// I.i.d. uniform costs; episode `k` of trial `t` is a pure function of
/// `(seed, t, k)`.
#[derive(Clone, Debug)]
pub struct UniformRandom {
    pairs: usize,
    seed: u64,
    trial: u64,
}

impl UniformRandom {
    pub fn new(pairs: usize, seed: u64, trial: u64) -> Self {
        UniformRandom { pairs, seed, trial }
    }
}

impl Adversary for UniformRandom {
    fn cost(&mut self, episode: usize, _history: &History) -> Result<CostFunction, AdversaryError> {
        let mut rng = episode_rng(self.seed, self.trial, episode);
        Ok(CostFunction::new((0..self.pairs).map(|_| rng.gen::<f64>()).collect())?)
    }
}

/// Two cost functions in alternation: `c_A, c_B, c_A, …`.
#[derive(Clone, Debug)]
pub struct Alternating {
    pub first: CostFunction,
    pub second: CostFunction,
}

impl Alternating {
    /// Both cost functions drawn uniformly from `seed`.
    pub fn random(pairs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || CostFunction::new((0..pairs).map(|_| rng.gen::<f64>()).collect()).expect("uniform draws lie in [0,1]");
        let first = draw();
        let second = draw();
        Alternating { first, second }
    }
}

impl Adversary for Alternating {
    fn cost(&mut self, episode: usize, _history: &History) -> Result<CostFunction, AdversaryError> {
        Ok(if episode % 2 == 0 { self.first.clone() } else { self.second.clone() })
    }
}

/// An explicit sequence, optionally repeated.
#[derive(Clone, Debug)]
pub struct Sequence {
    costs: Vec<CostFunction>,
    cyclic: bool,
}

impl Sequence {
    pub fn new(costs: Vec<CostFunction>, cyclic: bool) -> Self {
        Sequence { costs, cyclic }
    }
}

impl Adversary for Sequence {
    fn cost(&mut self, episode: usize, _history: &History) -> Result<CostFunction, AdversaryError> {
        if self.costs.is_empty() {
            return Err(AdversaryError::Exhausted { available: 0, requested: episode + 1 });
        }
        let idx = if self.cyclic { episode % self.costs.len() } else { episode };
        self.costs
            .get(idx)
            .cloned()
            .ok_or(AdversaryError::Exhausted { available: self.costs.len(), requested: episode + 1 })
    }
}

/// Reads a cost file: a JSON array with one object per episode mapping
/// `"(s,a)"` labels to values in `[0,1]`. Pairs not listed cost 0.
pub fn load_cost_sequence(mdp: &SspMdp, path: impl AsRef<Path>) -> Result<Vec<CostFunction>, AdversaryError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| AdversaryError::Format { path: shown.clone(), message: e.to_string() })?;
    let raw: Vec<BTreeMap<String, f64>> = serde_json::from_str(&text)
        .map_err(|e| AdversaryError::Format { path: shown.clone(), message: e.to_string() })?;
    raw.iter()
        .enumerate()
        .map(|(k, entry)| {
            let mut values = vec![0.0; mdp.num_pairs()];
            for (label, v) in entry {
                let p = mdp.pair_by_label(label).ok_or_else(|| AdversaryError::Format {
                    path: shown.clone(),
                    message: format!("episode {}: unknown pair {label}", k + 1),
                })?;
                if !(0.0..=1.0).contains(v) {
                    return Err(AdversaryError::InvalidCost(format!("episode {}: {label} = {v} outside [0,1]", k + 1)));
                }
                values[p.0] = *v;
            }
            Ok(CostFunction::new(values)?)
        })
        .collect()
}

/// Writes a cost sequence in the format read by [`load_cost_sequence`].
pub fn save_cost_sequence(mdp: &SspMdp, costs: &[CostFunction], path: impl AsRef<Path>) -> std::io::Result<()> {
    let raw: Vec<BTreeMap<String, f64>> = costs
        .iter()
        .map(|c| mdp.pairs().map(|p| (mdp.pair_label(p), c.get(p))).collect())
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&raw).expect("cost maps serialise"))
}
