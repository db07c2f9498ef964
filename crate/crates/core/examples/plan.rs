//! Planning on a known SSP: the fastest policy (diameter and hitting times)
//! and the best fixed deterministic policy for a cost function.
//!
//! Usage: `cargo run --example plan [-- path/to/mdp.json]` (defaults to the
//! bundled three-state toy).

use anyhow::Result;

use ssp_lab::mdp::{best_fixed_policy_for_total, compute_fast_policy, SspMdp, Validation};
use ssp_lab::toy;

fn main() -> Result<()> {
    let mdp = match std::env::args().nth(1) {
        Some(path) => SspMdp::from_json_str(&std::fs::read_to_string(path)?, Validation::Strict)?,
        None => toy::three_state(),
    };
    let fast = compute_fast_policy(&mdp)?;
    println!("diameter D = {:.6}", fast.diameter);
    for s in mdp.states() {
        println!("  {:>6}: fastest action {}, hitting time {:.6}", mdp.state_name(s), fast.actions[s.0], fast.hitting_times[s.0]);
    }

    let cost = if mdp.num_pairs() == 6 { toy::three_state_costs(&mdp).as_slice().to_vec() } else { vec![0.5; mdp.num_pairs()] };
    let best = best_fixed_policy_for_total(&mdp, &cost, 1)?;
    println!("best fixed policy: actions {:?}, cost {:.6}, hitting time {:.6}", best.actions, best.total_cost, best.hitting_time);
    Ok(())
}
