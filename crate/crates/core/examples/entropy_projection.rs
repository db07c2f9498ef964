//! One negative-entropy mirror-descent step over the bounded occupancy
//! polytope, with its KKT residual and membership check.

use anyhow::Result;

use ssp_lab::mdp::{compute_fast_policy, StationaryPolicy};
use ssp_lab::occupancy::{membership_residual, occupancy_of_policy, FlatPolytope};
use ssp_lab::omd::{EntropyProjection, SolverOptions};
use ssp_lab::toy;

fn main() -> Result<()> {
    let mdp = toy::three_state();
    let cost = toy::three_state_costs(&mdp);
    let budget = compute_fast_policy(&mdp)?.initial_hitting_time(&mdp) + 2.0;
    let poly = FlatPolytope::new(&mdp, budget)?;

    // Reference point: the uniform policy's occupancy.
    let start = poly.from_pairs(&occupancy_of_policy(&mdp, &StationaryPolicy::uniform(&mdp))?);
    let log_center: Vec<f64> = start.iter().map(|x| x.ln()).collect();
    let weights = vec![1.0; start.len()];
    let loss = poly.from_pairs(cost.as_slice());

    for eta in [0.1, 1.0, 10.0] {
        let step = EntropyProjection { polytope: poly.linear(), weights: &weights, eta, cost: &loss, log_center: &log_center };
        let sol = step.solve(None, &SolverOptions::default())?;
        let q = poly.to_pairs(&sol.x);
        let value: f64 = q.iter().zip(cost.as_slice()).map(|(q, c)| q * c).sum();
        println!(
            "η = {eta:>5}: ⟨q,c⟩ = {value:.6}, KKT {:.1e}, {} iterations, membership residual {:.1e}",
            sol.diagnostics.kkt_residual,
            sol.diagnostics.iterations,
            membership_residual(&mdp, &q, budget)
        );
    }
    Ok(())
}
