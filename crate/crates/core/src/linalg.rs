//! Thin wrappers over dense factorizations used by the planners and solvers.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` by LU with partial pivoting; `None` when `a` is singular
/// or the result is not finite.
pub(crate) fn lu_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// A reusable factorization of a symmetric positive-definite matrix:
/// Cholesky after symmetric diagonal (Jacobi) scaling, retried with a small
/// relative ridge when it breaks down numerically, with LU as the last
/// resort. Solves apply two steps of iterative refinement.
pub(crate) struct SpdFactor {
    scale: Vec<f64>,
    scaled: DMatrix<f64>,
    kind: FactorKind,
}

enum FactorKind {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SpdFactor {
    pub(crate) fn new(a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let v = a[(i, i)];
                if v > 0.0 && v.is_finite() { 1.0 / v.sqrt() } else { 1.0 }
            })
            .collect();
        let mut scaled = a;
        for i in 0..n {
            for j in 0..n {
                // Multiply one factor at a time: `s_i s_j` alone can overflow
                // when a diagonal entry is tiny.
                scaled[(i, j)] = scaled[(i, j)] * scale[i] * scale[j];
            }
        }
        if scaled.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for ridge in [0.0, 1e-14, 1e-12, 1e-10] {
            let mut m = scaled.clone();
            for i in 0..n {
                m[(i, i)] += ridge;
            }
            if let Some(ch) = m.cholesky() {
                return Some(SpdFactor { scale, scaled, kind: FactorKind::Cholesky(ch) });
            }
        }
        let lu = scaled.clone().lu();
        lu.is_invertible().then_some(SpdFactor { scale, scaled, kind: FactorKind::Lu(lu) })
    }

    fn solve_scaled(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.kind {
            FactorKind::Cholesky(ch) => Some(ch.solve(b)),
            FactorKind::Lu(lu) => lu.solve(b),
        }
    }

    /// Solves `a x = b`; `None` when the result is not finite.
    pub(crate) fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.scale.len();
        let bs = DVector::from_iterator(n, (0..n).map(|i| b[i] * self.scale[i]));
        let mut y = self.solve_scaled(&bs)?;
        for _ in 0..2 {
            let r = &bs - &self.scaled * &y;
            y += self.solve_scaled(&r)?;
        }
        y.iter().all(|v| v.is_finite()).then(|| DVector::from_iterator(n, (0..n).map(|i| y[i] * self.scale[i])))
    }
}

/// Solves a symmetric positive-definite system with [`SpdFactor`].
pub(crate) fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    SpdFactor::new(a)?.solve(b)
}
