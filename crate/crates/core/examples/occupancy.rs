//! Occupancy measures: the identities linking them to costs-to-go and
//! hitting times, membership in the bounded polytope, and the layered
//! occupancy of the loop-free reduction.

use anyhow::Result;

use ssp_lab::mdp::{compute_cost_to_go, compute_fast_policy, compute_hitting_times, StationaryPolicy};
use ssp_lab::occupancy::{membership_residual, occupancy_of_policy, LoopFree};
use ssp_lab::toy;

fn main() -> Result<()> {
    let mdp = toy::three_state();
    let cost = toy::three_state_costs(&mdp);
    let policy = StationaryPolicy::uniform(&mdp);
    let s0 = mdp.initial().0;

    let q = occupancy_of_policy(&mdp, &policy)?;
    let qc: f64 = q.iter().zip(cost.as_slice()).map(|(q, c)| q * c).sum();
    let mass: f64 = q.iter().sum();
    println!("uniform policy occupancy: {q:.4?}");
    println!("⟨q,c⟩ = {qc:.10}  vs  J(s0) = {:.10}", compute_cost_to_go(&mdp, &policy, cost.as_slice())?[s0]);
    println!("Σq    = {mass:.10}  vs  T(s0) = {:.10}", compute_hitting_times(&mdp, &policy)?[s0]);
    for budget in [mass, mass - 0.5] {
        println!("membership residual with budget {budget:.3}: {:.3e}", membership_residual(&mdp, &q, budget));
    }

    let fast = compute_fast_policy(&mdp)?;
    let lf = LoopFree::new(&mdp, 4, (4.0 * fast.diameter).ceil() as usize)?;
    let layered = lf.occupancy_of(&mdp, &lf.lift(&policy));
    println!(
        "loop-free reduction: H1 = {}, H2 = {}, {} variables, layered mass {:.6}",
        lf.h1(),
        lf.h2(),
        lf.num_vars(),
        layered.iter().zip(lf.mass_weights()).map(|(q, w)| q * w).sum::<f64>()
    );
    Ok(())
}
