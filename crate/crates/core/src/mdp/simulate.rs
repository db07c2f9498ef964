//! Episode simulation in the true MDP.

use rand::Rng;
use serde::Serialize;

use super::{CostFunction, PairId, SspMdp, StateId, StationaryPolicy, Successor, Transition};

/// Default number of steps after which an episode is cut off.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

/// Chooses an action (by position at the state) given the state and the
/// 1-based step index within the episode.
pub trait ActionSource {
    fn choose<R: Rng + ?Sized>(&self, mdp: &SspMdp, state: StateId, step: u64, rng: &mut R) -> usize;
}

impl ActionSource for StationaryPolicy {
    fn choose<R: Rng + ?Sized>(&self, mdp: &SspMdp, state: StateId, _step: u64, rng: &mut R) -> usize {
        self.sample_action(mdp, state, rng)
    }
}

/// Simulation limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulationOptions {
    pub step_cap: u64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { step_cap: DEFAULT_STEP_CAP }
    }
}

/// What happened in one episode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeTrace {
    /// Visit counts `N(s,a)` indexed by pair.
    pub visits: Vec<u64>,
    /// Number of steps taken (actions executed).
    pub steps: u64,
    /// `⟨N, c⟩` for the cost function supplied to the simulator.
    pub cost: f64,
    /// Whether the step cap cut the episode short.
    pub truncated: bool,
}

/// Samples a successor from a row, renormalising by the row total so that
/// leniently loaded (non-stochastic) rows can still be executed.
pub fn sample_successor<R: Rng + ?Sized>(row: &[Transition], rng: &mut R) -> Successor {
    let total: f64 = row.iter().map(|t| t.prob).sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for t in row {
        acc += t.prob;
        if u < acc {
            return t.next;
        }
    }
    row.last().map(|t| t.next).unwrap_or(Successor::Goal)
}

/// Runs one episode from the initial state, calling `observe(step, pair)`
/// after each action is chosen.
pub fn simulate_episode_observed<P, R, F>(
    mdp: &SspMdp,
    policy: &P,
    cost: Option<&CostFunction>,
    rng: &mut R,
    options: SimulationOptions,
    mut observe: F,
) -> EpisodeTrace
where
    P: ActionSource + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u64, PairId),
{
    let mut visits = vec![0u64; mdp.num_pairs()];
    let mut state = mdp.initial();
    let mut steps = 0u64;
    let mut total = 0.0;
    loop {
        if steps >= options.step_cap {
            return EpisodeTrace { visits, steps, cost: total, truncated: true };
        }
        steps += 1;
        let a = policy.choose(mdp, state, steps, rng);
        let p = mdp.pair(state, a);
        visits[p.0] += 1;
        if let Some(c) = cost {
            total += c.get(p);
        }
        observe(steps, p);
        match sample_successor(mdp.transitions(p), rng) {
            Successor::Goal => return EpisodeTrace { visits, steps, cost: total, truncated: false },
            Successor::State(next) => state = next,
        }
    }
}

/// Runs one episode from the initial state.
pub fn simulate_episode<P, R>(
    mdp: &SspMdp,
    policy: &P,
    cost: Option<&CostFunction>,
    rng: &mut R,
    options: SimulationOptions,
) -> EpisodeTrace
where
    P: ActionSource + ?Sized,
    R: Rng + ?Sized,
{
    simulate_episode_observed(mdp, policy, cost, rng, options, |_, _| {})
}
