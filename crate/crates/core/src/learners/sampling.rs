//! Random feasible competitors for the optimality audits.

use rand::RngCore;

use crate::mdp::{SspMdp, StationaryPolicy};
use crate::occupancy::{occupancy_of_policy, FlatPolytope, LinearPolytope, LoopFree};

/// Random stationary policy with i.i.d. exponential action weights.
fn random_stationary(mdp: &SspMdp, rng: &mut dyn RngCore) -> StationaryPolicy {
    use rand::Rng;
    let w: Vec<f64> = (0..mdp.num_pairs()).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    StationaryPolicy::from_pair_weights(mdp, &w)
}

/// Moves `z` towards the feasible point `x` just enough to satisfy the budget
/// and (optionally) per-group floors; both are convex so the mixture stays
/// feasible.
pub(crate) fn repair_toward(
    z: &mut [f64],
    x: &[f64],
    poly: &LinearPolytope,
    floors: Option<(&[Vec<usize>], f64)>,
) {
    let mut t: f64 = 0.0;
    let (mz, mx) = (poly.total_mass(z), poly.total_mass(x));
    if mz > poly.budget() {
        t = t.max((mz - poly.budget()) / (mz - mx).max(f64::MIN_POSITIVE));
    }
    if let Some((groups, floor)) = floors {
        let w = poly.mass_weights();
        for g in groups {
            let az: f64 = g.iter().map(|i| w[*i] * z[*i]).sum();
            let ax: f64 = g.iter().map(|i| w[*i] * x[*i]).sum();
            if az < floor {
                t = t.max((floor - az) / (ax - az).max(f64::MIN_POSITIVE));
            }
        }
    }
    let t = t.min(1.0);
    if t > 0.0 {
        for (zi, xi) in z.iter_mut().zip(x) {
            *zi += t * (xi - *zi);
        }
    }
}

/// Occupancies of random stationary policies, repaired into `Δ(T)`.
pub(crate) fn flat_competitors(
    mdp: &SspMdp,
    poly: &FlatPolytope,
    solution: &[f64],
    count: usize,
    rng: &mut dyn RngCore,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10 * count {
        attempts += 1;
        let pi = random_stationary(mdp, rng);
        let Ok(q) = occupancy_of_policy(mdp, &pi) else { continue };
        let mut z = poly.from_pairs(&q);
        repair_toward(&mut z, solution, poly.linear(), None);
        out.push(z);
    }
    out
}

/// Occupancies of random layered policies, repaired into the layered
/// polytope (and floors, if any).
pub(crate) fn layered_competitors(
    mdp: &SspMdp,
    loop_free: &LoopFree,
    poly: &LinearPolytope,
    floor: Option<f64>,
    solution: &[f64],
    count: usize,
    rng: &mut dyn RngCore,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let pi = loop_free.random_policy(mdp, rng);
            let mut z = loop_free.occupancy_of(mdp, &pi);
            repair_toward(&mut z, solution, poly, floor.map(|f| (loop_free.groups(), f)));
            z
        })
        .collect()
}
