//! Small fixed instances used by the examples, the tests and the acceptance
//! suite.

use crate::mdp::{CostFunction, SspMdp, Validation};

/// JSON description of the three-state toy: two actions per state, loops
/// back to earlier states, and stochastic exits to the goal.
pub const THREE_STATE_JSON: &str = r#"{
  "states": ["s0", "s1", "s2"],
  "initial": "s0",
  "goal": "g",
  "actions": {"s0": ["a0", "a1"], "s1": ["a0", "a1"], "s2": ["a0", "a1"]},
  "transitions": {
    "s0": {"a0": [["s1", 0.7], ["g", 0.3]], "a1": [["s2", 0.8], ["s0", 0.2]]},
    "s1": {"a0": [["g", 0.6], ["s1", 0.4]], "a1": [["s2", 0.5], ["g", 0.5]]},
    "s2": {"a0": [["g", 0.5], ["s0", 0.5]], "a1": [["g", 0.9], ["s2", 0.1]]}
  }
}"#;

/// The three-state toy instance.
pub fn three_state() -> SspMdp {
    SspMdp::from_json_str(THREE_STATE_JSON, Validation::Strict).expect("toy instance is valid")
}

/// A fixed, non-uniform cost function on the three-state toy.
pub fn three_state_costs(mdp: &SspMdp) -> CostFunction {
    let values = [0.2, 0.6, 0.9, 0.3, 0.5, 0.1];
    assert_eq!(mdp.num_pairs(), values.len());
    CostFunction::new(values.to_vec()).expect("costs are in [0,1]")
}
