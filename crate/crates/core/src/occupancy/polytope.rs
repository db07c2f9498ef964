//! Sparse linear description `{x ≥ 0 : A x = b, ⟨w, x⟩ ≤ T}` shared by the
//! flat polytope `Δ(T)` and its layered counterpart.

/// A polytope given by sparse equality rows, non-negativity and one budget
/// constraint on a weighted total.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPolytope {
    /// Column-wise non-zeros of `A`: for each variable, `(row, coefficient)`.
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Weight `w_i` of each variable in the total-mass constraint.
    mass: Vec<f64>,
    budget: f64,
}

impl LinearPolytope {
    pub(crate) fn new(cols: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>, mass: Vec<f64>, budget: f64) -> Self {
        assert_eq!(cols.len(), mass.len());
        debug_assert!(cols.iter().flatten().all(|(r, _)| *r < rhs.len()));
        LinearPolytope { cols, rhs, mass, budget }
    }

    pub fn num_vars(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Non-zeros of column `i`.
    pub fn col(&self, i: usize) -> &[(usize, f64)] {
        &self.cols[i]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn mass_weights(&self) -> &[f64] {
        &self.mass
    }

    /// The budget `T`.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `⟨w, x⟩`, the total expected number of steps.
    pub fn total_mass(&self, x: &[f64]) -> f64 {
        self.mass.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for (col, xi) in self.cols.iter().zip(x) {
            for (r, a) in col {
                out[*r] += a * xi;
            }
        }
        out
    }

    /// `Aᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|col| col.iter().map(|(r, a)| a * y[*r]).sum()).collect()
    }

    /// `‖A x − b‖_∞`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest violation among the equalities, the budget and non-negativity.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let neg = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        let over = (self.total_mass(x) - self.budget).max(0.0);
        self.equality_residual(x).max(neg).max(over)
    }
}
