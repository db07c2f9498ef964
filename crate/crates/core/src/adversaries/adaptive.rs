//! Adaptive adversaries: cost functions chosen from the public history.

use super::{Adversary, AdversaryError, History};
use crate::mdp::CostFunction;

/// Charges each pair the previous episode's visit count, normalised by the
/// largest count (zero costs in the first episode). Pairs the learner used
/// most become the most expensive.
#[derive(Clone, Copy, Debug)]
pub struct FollowLearner {
    pairs: usize,
}

impl FollowLearner {
    pub fn new(pairs: usize) -> Self {
        FollowLearner { pairs }
    }
}

impl Adversary for FollowLearner {
    fn cost(&mut self, _episode: usize, history: &History) -> Result<CostFunction, AdversaryError> {
        let Some(last) = history.visits.last() else {
            return Ok(CostFunction::zeros(self.pairs));
        };
        let max = last.iter().copied().max().unwrap_or(0).max(1) as f64;
        Ok(CostFunction::new(last.iter().map(|n| *n as f64 / max).collect())?)
    }

    fn is_adaptive(&self) -> bool {
        true
    }
}

/// Adversary defined by a closure of `(episode, history)`; returned values
/// are validated to lie in `[0,1]`.
pub struct Callback<F>(pub F);

impl<F> Adversary for Callback<F>
where
    F: FnMut(usize, &History) -> Vec<f64> + Send,
{
    fn cost(&mut self, episode: usize, history: &History) -> Result<CostFunction, AdversaryError> {
        let values = (self.0)(episode, history);
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AdversaryError::InvalidCost(format!("callback returned {v} outside [0,1]")));
        }
        Ok(CostFunction::new(values)?)
    }

    fn is_adaptive(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn follow_learner_normalises_last_visits() {
        let mut adv = FollowLearner::new(3);
        let mut h = History::default();
        assert_eq!(adv.cost(0, &h).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
        h.push(vec![4, 2, 0], vec![None; 3]);
        assert_eq!(adv.cost(1, &h).unwrap().as_slice(), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn callback_rejects_out_of_range_costs() {
        let mut adv = Callback(|k: usize, _: &History| vec![k as f64]);
        assert!(adv.cost(0, &History::default()).is_ok());
        assert!(adv.cost(2, &History::default()).is_err());
    }
}
