//! Optimality audit: a convex minimiser must not be beaten by any feasible
//! competitor, nor by small moves towards one.

use serde::Serialize;

/// Outcome of [`audit_minimiser`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub competitors: usize,
    /// Largest `F(x*) − F(z)` over competitors and segment points (positive
    /// means a competitor did better).
    pub worst_gap: f64,
}

/// Evaluates `objective` at `solution`, at each competitor `z` and at points
/// `x* + t (z − x*)` for `t ∈ {1e-1, 1e-2, 1e-3}` (feasible by convexity).
pub fn audit_minimiser<F: Fn(&[f64]) -> f64>(objective: F, solution: &[f64], competitors: &[Vec<f64>]) -> AuditReport {
    let base = objective(solution);
    let mut worst = f64::NEG_INFINITY;
    let mut point = vec![0.0; solution.len()];
    for z in competitors {
        for t in [1.0, 1e-1, 1e-2, 1e-3] {
            for ((p, x), zi) in point.iter_mut().zip(solution).zip(z) {
                *p = x + t * (zi - x);
            }
            let v = objective(&point);
            if v.is_finite() {
                worst = worst.max(base - v);
            }
        }
    }
    AuditReport { competitors: competitors.len(), worst_gap: worst.max(f64::NEG_INFINITY) }
}
