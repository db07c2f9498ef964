//! The feedback filter between the environment and the learner.

use crate::learners::BanditFeedback;
use crate::mdp::{CostFunction, EpisodeTrace};
use crate::occupancy::LayeredCounts;

/// Full information: the whole cost function is revealed.
pub fn reveal_full(cost: &CostFunction) -> Vec<Option<f64>> {
    cost.as_slice().iter().map(|c| Some(*c)).collect()
}

/// Bandit feedback: `c_k(s,a)` is revealed iff `(s,a)` was visited during
/// the episode; every other entry stays hidden.
pub fn reveal_bandit(cost: &CostFunction, trace: &EpisodeTrace, counts: LayeredCounts) -> BanditFeedback {
    assert_eq!(cost.len(), trace.visits.len(), "trace and cost function disagree on the number of pairs");
    let observed = cost
        .as_slice()
        .iter()
        .zip(&trace.visits)
        .map(|(c, n)| (*n > 0).then_some(*c))
        .collect();
    BanditFeedback { counts, observed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_visited_pairs_are_revealed() {
        let cost = CostFunction::new(vec![0.1, 0.2, 0.3]).unwrap();
        let trace = EpisodeTrace { visits: vec![2, 0, 1], steps: 3, cost: 0.5, truncated: false };
        let fb = reveal_bandit(&cost, &trace, LayeredCounts(vec![]));
        assert_eq!(fb.observed, vec![Some(0.1), None, Some(0.3)]);
        assert!(reveal_full(&cost).iter().all(Option::is_some));
    }
}
