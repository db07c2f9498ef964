//! Stochastic hard instances: `N` branches `s_1..s_N` that each reach the
//! goal in `T*` expected steps, an escape state `f` that reaches it in `D`,
//! and Bernoulli costs on the branches with one slightly cheaper "good"
//! branch hidden among them.
//!
//! Instance layout:
//! - `s0` has actions `a1..aN`; `aj` moves to `sj` deterministically;
//! - each `sj` has `ag` (goal w.p. `1/T*`, else stay, cost `Bernoulli(·)`)
//!   and `af` (move to `f`, cost 0);
//! - `f` has `ag` (goal w.p. `1/D`, else stay, cost 1);
//! - every action at `s0` costs 0.
//!
//! Branch `j*` costs `Bernoulli(α)` per step and the others
//! `Bernoulli(α + ε)`, with `α = D / (2T*)`. Costs are drawn once per
//! episode and stay fixed during it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oblivious::episode_rng;
use super::{Adversary, AdversaryError, History};
use crate::mdp::{CostFunction, MdpDocument, PairId, SspMdp, StationaryPolicy, Validation};

/// Which information structure the gap `ε` is tuned for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundMode {
    /// `ε = ¼ √(α(1−α) / (2K))`.
    Full,
    /// `ε = ¼ √(N α(1−α) / (2K))`, with `N = S − 2` branches.
    Bandit,
}

impl FromStr for LowerBoundMode {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" | "full-info" => Ok(LowerBoundMode::Full),
            "bandit" => Ok(LowerBoundMode::Bandit),
            _ => Err(AdversaryError::ParameterViolation(format!("unknown mode '{s}' (expected full or bandit)"))),
        }
    }
}

impl fmt::Display for LowerBoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerBoundMode::Full => "full",
            LowerBoundMode::Bandit => "bandit",
        })
    }
}

/// Construction parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundParams {
    /// Expected time `D` to reach the goal from the escape state.
    pub diameter: usize,
    /// Expected time `T*` to reach the goal from a branch via `ag`.
    pub t_star: usize,
    pub episodes: usize,
    pub mode: LowerBoundMode,
    /// Number of branches `N ≥ 2` (the instance has `N + 2` states).
    pub branches: usize,
    /// Seed of the good-branch draw and of the per-episode cost draws.
    pub seed: u64,
}

impl LowerBoundParams {
    /// `α = D / (2T*)`.
    pub fn alpha(&self) -> f64 {
        self.diameter as f64 / (2.0 * self.t_star as f64)
    }

    /// The gap `ε` for this mode.
    pub fn epsilon(&self) -> f64 {
        let a = self.alpha();
        let n = match self.mode {
            LowerBoundMode::Full => 1.0,
            LowerBoundMode::Bandit => self.branches as f64,
        };
        0.25 * (n * a * (1.0 - a) / (2.0 * self.episodes as f64)).sqrt()
    }

    fn check(&self) -> Result<(), AdversaryError> {
        let violation = |m: String| Err(AdversaryError::ParameterViolation(m));
        let (d, t, k, n) = (self.diameter, self.t_star, self.episodes, self.branches);
        if d < 1 {
            return violation(format!("D = {d} must be at least 1"));
        }
        if n < 2 {
            return violation(format!("N = {n} branches; at least 2 are required (S = N + 2 ≥ 4)"));
        }
        if t < d + 1 {
            return violation(format!("T* ≥ D + 1 violated: T* = {t}, D = {d}"));
        }
        if k < t {
            return violation(format!("K ≥ T* violated: K = {k}, T* = {t}"));
        }
        if self.mode == LowerBoundMode::Bandit && k < (n + 2) * t {
            return violation(format!("K ≥ S·T* violated: K = {k}, S = {}, T* = {t}", n + 2));
        }
        let (a, e) = (self.alpha(), self.epsilon());
        if e > a {
            return violation(format!("ε ≤ α violated: ε = {e}, α = {a}"));
        }
        Ok(())
    }
}

/// A built instance and its cost law.
#[derive(Clone, Debug)]
pub struct LowerBound {
    pub mdp: SspMdp,
    pub law: CostLaw,
}

impl LowerBound {
    /// The deterministic policy taking `aj` at `s0` and `ag` at `sj`
    /// (`j` is 1-based; other states take their first action).
    pub fn branch_policy(&self, j: usize) -> StationaryPolicy {
        let mut actions = vec![0; self.mdp.num_states()];
        actions[self.mdp.initial().0] = j - 1;
        StationaryPolicy::deterministic(&self.mdp, &actions)
    }
}

/// Validates the parameters and builds the instance; the good branch is
/// drawn uniformly from `seed`.
pub fn build_lower_bound(params: LowerBoundParams) -> Result<LowerBound, AdversaryError> {
    params.check()?;
    let n = params.branches;
    let branch = |j: usize| format!("s{j}");
    let mut states = vec!["s0".to_string()];
    states.extend((1..=n).map(branch));
    states.push("f".into());

    let mut actions = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    actions.insert("s0".to_string(), (1..=n).map(|j| format!("a{j}")).collect::<Vec<_>>());
    transitions.insert(
        "s0".to_string(),
        (1..=n).map(|j| (format!("a{j}"), vec![(branch(j), 1.0)])).collect::<BTreeMap<_, _>>(),
    );
    let stay = 1.0 / params.t_star as f64;
    for j in 1..=n {
        actions.insert(branch(j), vec!["ag".into(), "af".into()]);
        let mut row = BTreeMap::new();
        row.insert("ag".to_string(), vec![("g".to_string(), stay), (branch(j), 1.0 - stay)]);
        row.insert("af".to_string(), vec![("f".to_string(), 1.0)]);
        transitions.insert(branch(j), row);
    }
    let exit = 1.0 / params.diameter as f64;
    actions.insert("f".into(), vec!["ag".into()]);
    let mut row = BTreeMap::new();
    let mut f_row = vec![("g".to_string(), exit)];
    if exit < 1.0 {
        f_row.push(("f".to_string(), 1.0 - exit));
    }
    row.insert("ag".to_string(), f_row);
    transitions.insert("f".into(), row);

    let doc = MdpDocument { states, initial: "s0".into(), goal: "g".into(), actions, transitions };
    let mdp = SspMdp::from_document(&doc, Validation::Strict)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let good = rng.gen_range(1..=n);
    let law = CostLaw::for_instance(&mdp, &params, good);
    Ok(LowerBound { mdp, law })
}

/// The per-episode cost distribution of a hard instance: fixed costs on
/// most pairs and independent Bernoulli costs on the others.
#[derive(Clone, Debug, PartialEq)]
pub struct CostLaw {
    pub mode: LowerBoundMode,
    pub diameter: usize,
    pub t_star: usize,
    pub episodes: usize,
    pub branches: usize,
    pub alpha: f64,
    pub epsilon: f64,
    /// The good branch `j*` (1-based).
    pub good_index: usize,
    pub seed: u64,
    /// `T* + 1`, the hitting time of the intended optimal policy.
    pub budget_hint: Option<f64>,
    base: Vec<f64>,
    bernoulli: Vec<(PairId, f64)>,
}

/// File form of a [`CostLaw`], with pairs given by their `(s,a)` labels.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostLawDocument {
    mode: LowerBoundMode,
    #[serde(rename = "D")]
    diameter: usize,
    t_star: usize,
    #[serde(rename = "K")]
    episodes: usize,
    #[serde(rename = "N")]
    branches: usize,
    alpha: f64,
    epsilon: f64,
    good_index: usize,
    seed: u64,
    #[serde(default)]
    budget_hint: Option<f64>,
    fixed: BTreeMap<String, f64>,
    bernoulli: BTreeMap<String, f64>,
}

impl CostLaw {
    fn for_instance(mdp: &SspMdp, params: &LowerBoundParams, good: usize) -> Self {
        let (alpha, epsilon) = (params.alpha(), params.epsilon());
        let mut base = vec![0.0; mdp.num_pairs()];
        let f = mdp.state_by_name("f").expect("instance has an escape state");
        base[mdp.pair(f, 0).0] = 1.0;
        let bernoulli = (1..=params.branches)
            .map(|j| {
                let s = mdp.state_by_name(&format!("s{j}")).expect("branch state exists");
                let mean = if j == good { alpha } else { alpha + epsilon };
                (mdp.pair(s, 0), mean)
            })
            .collect();
        CostLaw {
            mode: params.mode,
            diameter: params.diameter,
            t_star: params.t_star,
            episodes: params.episodes,
            branches: params.branches,
            alpha,
            epsilon,
            good_index: good,
            seed: params.seed,
            budget_hint: Some(params.t_star as f64 + 1.0),
            base,
            bernoulli,
        }
    }

    /// Pairs with random costs and their means.
    pub fn bernoulli(&self) -> &[(PairId, f64)] {
        &self.bernoulli
    }

    /// Expected cost function `E[c_k]`.
    pub fn mean_cost(&self) -> Vec<f64> {
        let mut c = self.base.clone();
        for (p, m) in &self.bernoulli {
            c[p.0] = *m;
        }
        c
    }

    /// Draws one episode's cost function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CostFunction {
        let mut c = self.base.clone();
        for (p, m) in &self.bernoulli {
            c[p.0] = if rng.gen::<f64>() < *m { 1.0 } else { 0.0 };
        }
        CostFunction::new(c).expect("Bernoulli and fixed costs lie in [0,1]")
    }

    pub fn to_json_string(&self, mdp: &SspMdp) -> String {
        let label = |p: PairId| mdp.pair_label(p);
        let doc = CostLawDocument {
            mode: self.mode,
            diameter: self.diameter,
            t_star: self.t_star,
            episodes: self.episodes,
            branches: self.branches,
            alpha: self.alpha,
            epsilon: self.epsilon,
            good_index: self.good_index,
            seed: self.seed,
            budget_hint: self.budget_hint,
            fixed: mdp
                .pairs()
                .filter(|p| !self.bernoulli.iter().any(|(q, _)| q == p))
                .map(|p| (label(p), self.base[p.0]))
                .collect(),
            bernoulli: self.bernoulli.iter().map(|(p, m)| (label(*p), *m)).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("cost law serialises")
    }

    pub fn save(&self, mdp: &SspMdp, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string(mdp))
    }

    /// Reads a cost law written by [`CostLaw::save`] for the given instance.
    pub fn load(mdp: &SspMdp, path: impl AsRef<Path>) -> Result<Self, AdversaryError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let format = |message: String| AdversaryError::Format { path: shown.clone(), message };
        let text = std::fs::read_to_string(path).map_err(|e| format(e.to_string()))?;
        let doc: CostLawDocument = serde_json::from_str(&text).map_err(|e| format(e.to_string()))?;
        let lookup = |label: &str| mdp.pair_by_label(label).ok_or_else(|| format(format!("unknown pair {label}")));
        let mut base = vec![0.0; mdp.num_pairs()];
        for (label, v) in &doc.fixed {
            if !(0.0..=1.0).contains(v) {
                return Err(AdversaryError::InvalidCost(format!("{label} = {v} outside [0,1]")));
            }
            base[lookup(label)?.0] = *v;
        }
        let mut bernoulli = Vec::with_capacity(doc.bernoulli.len());
        for (label, m) in &doc.bernoulli {
            if !(0.0..=1.0).contains(m) {
                return Err(AdversaryError::InvalidCost(format!("Bernoulli mean {m} of {label} outside [0,1]")));
            }
            bernoulli.push((lookup(label)?, *m));
        }
        bernoulli.sort_by_key(|(p, _)| p.0);
        Ok(CostLaw {
            mode: doc.mode,
            diameter: doc.diameter,
            t_star: doc.t_star,
            episodes: doc.episodes,
            branches: doc.branches,
            alpha: doc.alpha,
            epsilon: doc.epsilon,
            good_index: doc.good_index,
            seed: doc.seed,
            budget_hint: doc.budget_hint,
            base,
            bernoulli,
        })
    }
}

/// Samples a [`CostLaw`] independently per episode. Episode `k` of trial `t`
/// is a pure function of `(law seed, t, k)`; the good branch is part of the
/// law and is shared by all trials.
#[derive(Clone, Debug)]
pub struct LawAdversary {
    law: CostLaw,
    trial: u64,
}

impl LawAdversary {
    pub fn new(law: CostLaw, trial: u64) -> Self {
        LawAdversary { law, trial }
    }
}

impl Adversary for LawAdversary {
    fn cost(&mut self, episode: usize, _history: &History) -> Result<CostFunction, AdversaryError> {
        // Stream offset by one trial so that no episode reuses the stream of
        // the good-branch draw.
        let mut rng = episode_rng(self.law.seed, self.trial + 1, episode);
        Ok(self.law.sample(&mut rng))
    }

    fn budget_hint(&self) -> Option<f64> {
        self.law.budget_hint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{compute_fast_policy, compute_hitting_times};

    fn params(d: usize, t: usize, k: usize) -> LowerBoundParams {
        LowerBoundParams { diameter: d, t_star: t, episodes: k, mode: LowerBoundMode::Full, branches: 3, seed: 9 }
    }

    #[test]
    fn gap_matches_independent_arithmetic() {
        // α = 8/64 = 1/8; α(1−α) = 7/64; /(2·4096) = 7/524288;
        // √(7/524288) = √7/724.077… ; ¼ of that.
        let eps = 0.25 * (7.0f64 / 524_288.0).sqrt();
        let p = params(8, 32, 4096);
        assert!((p.alpha() - 0.125).abs() < 1e-15);
        assert!((p.epsilon() - eps).abs() < 1e-15);
        assert!((p.epsilon() - 9.1350e-4).abs() < 1e-7);
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(build_lower_bound(params(8, 32, 31)).is_err());
        assert!(build_lower_bound(params(8, 8, 100)).is_err());
        let mut bandit = params(2, 4, 15);
        bandit.mode = LowerBoundMode::Bandit;
        bandit.branches = 2;
        assert!(build_lower_bound(bandit).is_err());
        bandit.episodes = 16;
        assert!(build_lower_bound(bandit).is_ok());
    }

    #[test]
    fn instance_has_stated_diameter_and_branch_hitting_time() {
        for (d, t) in [(4, 8), (8, 32)] {
            let lb = build_lower_bound(params(d, t, 1000)).unwrap();
            let fast = compute_fast_policy(&lb.mdp).unwrap();
            let exact = compute_hitting_times(&lb.mdp, &fast.policy).unwrap();
            let diam = exact.iter().copied().fold(0.0, f64::max);
            assert!((diam - (d as f64 + 2.0)).abs() < 1e-6);
            for j in 1..=3 {
                let h = compute_hitting_times(&lb.mdp, &lb.branch_policy(j)).unwrap()[0];
                assert!((h - (t as f64 + 1.0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn law_round_trips_through_json() {
        let lb = build_lower_bound(params(4, 8, 100)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("law.json");
        lb.law.save(&lb.mdp, &path).unwrap();
        assert_eq!(CostLaw::load(&lb.mdp, &path).unwrap(), lb.law);
    }

    #[test]
    fn per_episode_costs_replay_and_respect_structure() {
        let lb = build_lower_bound(params(4, 8, 100)).unwrap();
        let mut a = LawAdversary::new(lb.law.clone(), 0);
        let mut b = LawAdversary::new(lb.law.clone(), 0);
        let h = History::default();
        for k in 0..20 {
            let c = a.cost(k, &h).unwrap();
            assert_eq!(c, b.cost(k, &h).unwrap());
            for p in lb.mdp.pairs() {
                let s = lb.mdp.state_name(lb.mdp.pair_state(p));
                let act = lb.mdp.action_name(p);
                match (s, act) {
                    ("f", _) => assert_eq!(c.get(p), 1.0),
                    ("s0", _) | (_, "af") => assert_eq!(c.get(p), 0.0),
                    _ => assert!(c.get(p) == 0.0 || c.get(p) == 1.0),
                }
            }
        }
    }
}
