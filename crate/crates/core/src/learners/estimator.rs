//! Importance-weighted cost estimators and bias terms for bandit feedback.
//!
//! All vectors are indexed by the aggregation groups of a [`LoopFree`]
//! reduction (original pairs, then the fast pair).

use super::LearnerError;
use crate::occupancy::{GroupKind, LayeredCounts, LoopFree};
use crate::mdp::SspMdp;

/// Aggregated visit counts `Ñ(s,a) = Σ_h Ñ(s,a,h)` (the fast pair counts
/// `H2` pseudo-visits when reached).
pub fn aggregated_counts(loop_free: &LoopFree, counts: &LayeredCounts) -> Vec<f64> {
    loop_free.aggregate(&counts.0)
}

/// `ĉ(s,a) = Ñ(s,a) c(s,a) / q(s,a)`, zero for unvisited pairs. The fast
/// pair's cost is always 1 and needs no observation.
pub fn estimate_costs(
    mdp: &SspMdp,
    loop_free: &LoopFree,
    q: &[f64],
    counts: &LayeredCounts,
    observed: &[Option<f64>],
) -> Result<Vec<f64>, LearnerError> {
    let n = aggregated_counts(loop_free, counts);
    let agg = loop_free.aggregate(q);
    (0..n.len())
        .map(|g| {
            if n[g] == 0.0 {
                return Ok(0.0);
            }
            let (c, label) = match loop_free.group_kind(g) {
                GroupKind::Pair(p) => {
                    let c = observed[p.0].ok_or_else(|| {
                        LearnerError::Feedback(format!("no cost revealed for visited pair {}", mdp.pair_label(p)))
                    })?;
                    (c, mdp.pair_label(p))
                }
                GroupKind::Fast => (1.0, "(s_f,a_f)".to_string()),
            };
            if !(agg[g] > 1e-300) {
                return Err(LearnerError::DivisionHazard { pair: label });
            }
            Ok(n[g] * c / agg[g])
        })
        .collect()
}

/// `b̂(s,a) = Σ_h h q(s,a,h) ĉ(s,a) / q(s,a)`.
pub fn bias_vector(loop_free: &LoopFree, q: &[f64], estimate: &[f64]) -> Vec<f64> {
    let agg = loop_free.aggregate(q);
    let moment = loop_free.layer_moment(q);
    estimate
        .iter()
        .zip(agg.iter().zip(&moment))
        .map(|(c, (a, m))| if *c == 0.0 { 0.0 } else { m * c / a })
        .collect()
}

/// Per-group cost vector `c(s,a)` (1 for the fast pair).
pub fn group_costs(loop_free: &LoopFree, cost: &[f64]) -> Vec<f64> {
    (0..loop_free.groups().len())
        .map(|g| match loop_free.group_kind(g) {
            GroupKind::Pair(p) => cost[p.0],
            GroupKind::Fast => 1.0,
        })
        .collect()
}

/// The expected bias `b(s,a) = Σ_h h q(s,a,h) c(s,a) / q(s,a)`.
pub fn expected_bias(loop_free: &LoopFree, q: &[f64], cost: &[f64]) -> Vec<f64> {
    bias_vector(loop_free, q, &group_costs(loop_free, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    #[test]
    fn unvisited_pairs_estimate_zero_and_formula_holds() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 3, 2).unwrap();
        let q = lf.occupancy_of(&m, &lf.uniform(&m));
        let mut counts = vec![0.0; lf.num_vars()];
        let first = lf.var(m.pair(m.initial(), 0), 1).unwrap();
        counts[first] = 1.0;
        let mut observed = vec![None; m.num_pairs()];
        observed[m.pair(m.initial(), 0).0] = Some(0.5);
        let est = estimate_costs(&m, &lf, &q, &LayeredCounts(counts), &observed).unwrap();
        let g = lf.group_of_var(first);
        let agg = lf.aggregate(&q);
        for (j, e) in est.iter().enumerate() {
            if j == g {
                assert!((e - 0.5 / agg[g]).abs() < 1e-15);
            } else {
                assert_eq!(*e, 0.0);
            }
        }
        let b = bias_vector(&lf, &q, &est);
        assert!(b[g] <= lf.horizon() as f64 * est[g]);
    }

    #[test]
    fn all_mass_on_one_layer_gives_layer_times_estimate() {
        let m = toy::three_state();
        let lf = LoopFree::new(&m, 4, 2).unwrap();
        let mut q = vec![0.0; lf.num_vars()];
        let p = m.pair(crate::mdp::StateId(1), 1);
        let i = lf.var(p, 3).unwrap();
        q[i] = 0.7;
        let mut est = vec![0.0; lf.groups().len()];
        est[lf.group_of_var(i)] = 2.0;
        assert!((bias_vector(&lf, &q, &est)[lf.group_of_var(i)] - 6.0).abs() < 1e-12);
    }
}
