//! Log-barrier mirror-descent steps whose regulariser acts on per-pair
//! aggregates of a layered occupancy, solved by a primal interior-point
//! Newton method.
//!
//! Variables `x` live on a [`LinearPolytope`]; group `g` (a pair of `Γ̃`)
//! aggregates them as `Y_g = Σ_{i∈g} ω_i x_i`. The step minimises
//!
//! ```text
//! F(x) = Σ_g  ℓ_g Y_g + (1/η_g) (r_g Y_g − 1 − ln(r_g Y_g))
//! ```
//!
//! (`r_g = 1/Y_{k,g}`; with `r = 0` it reduces to `ℓ·Y − Σ (1/η_g) ln Y_g`,
//! the regulariser itself) subject to the polytope and, optionally, a floor
//! `Σ_{i∈g} w_i x_i ≥ f` on the unskewed aggregates.
//!
//! `F` depends on `x` only through the aggregates, so the layered minimiser
//! is not unique. A barrier `−μ Σ_i ln x_i` with a tiny fixed `μ` (also
//! applied to the budget and floor slacks) selects the analytic centre of
//! the optimal face and keeps every coordinate strictly positive; the KKT
//! conditions of the unbarriered problem then hold with complementarity `μ`.

use nalgebra::{DMatrix, DVector};

use super::{OmdError, SolverDiagnostics, SolverOptions};
use crate::linalg::SpdFactor;
use crate::occupancy::LinearPolytope;

/// Consecutive Newton steps allowed without halving the stationarity measure.
const STALL_LIMIT: usize = 8;
/// Largest budget or floor violation of a start point (relative to
/// `1 + T`) that is treated as rounding rather than as an invalid input.
const SLACK_ROUNDING: f64 = 1e-8;

/// One aggregated log-barrier step.
#[derive(Clone, Copy, Debug)]
pub struct LogBarrierProjection<'a> {
    pub polytope: &'a LinearPolytope,
    /// Variable indices of each group.
    pub groups: &'a [Vec<usize>],
    /// Skew weight `ω_i` of each variable in its group aggregate.
    pub skew: &'a [f64],
    /// Per-group learning rates `η_g`.
    pub rates: &'a [f64],
    /// Per-group loss `ℓ_g` (per unit of skewed aggregate).
    pub loss: &'a [f64],
    /// `1 / Y_{k,g}` of the previous iterate; zeros for the initial point.
    pub inv_center: &'a [f64],
    /// Lower bound on every unskewed aggregate `Σ_{i∈g} w_i x_i`.
    pub floor: Option<f64>,
}

/// Solution of an aggregated log-barrier step.
#[derive(Clone, Debug)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    /// Equality multipliers, reused as a warm start.
    pub multipliers: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// The step written with explicit slack variables: `z = (x, s_floor, s_T)`
/// with rows `A x = b`, `Σ_{i∈g} w_i x_i − s_g = f` and `⟨w, x⟩ + s_T = T`.
/// Keeping the slacks as variables avoids computing them by cancellation,
/// which would otherwise cap the attainable accuracy near an active floor.
struct Extended {
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    n: usize,
}

impl Extended {
    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rhs.len()];
        for (col, zi) in self.cols.iter().zip(z) {
            for (r, a) in col {
                out[*r] += a * zi;
            }
        }
        out
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|col| col.iter().map(|(r, a)| a * y[*r]).sum()).collect()
    }
}

/// The Newton system of `Φ_μ` at a point. The Hessian is
/// `H = diag(μ/z²) + Σ_g α_g ω_g ω_gᵀ`; its inverse is applied group by group
/// with the Sherman–Morrison formula, which keeps the diagonal part exact even
/// when `μ/z²` spans many orders of magnitude. The Schur complement
/// `A H⁻¹ Aᵀ` is factorised once and the full system is iteratively refined.
struct NewtonSystem {
    /// `z_i² / μ`, the inverse of the diagonal part.
    inv_diag: Vec<f64>,
    alpha: Vec<f64>,
    /// `α_g / (1 + α_g ω_gᵀ D⁻¹ ω_g)`.
    beta: Vec<f64>,
    schur: SpdFactor,
}

impl NewtonSystem {
    fn new(prob: &LogBarrierProjection<'_>, ext: &Extended, z: &[f64], mu: f64) -> Option<Self> {
        let rows = ext.rhs.len();
        let y = prob.aggregates(&z[..ext.n]);
        let inv_diag: Vec<f64> = z.iter().map(|v| v * v / mu).collect();
        let alpha: Vec<f64> = prob.rates.iter().zip(&y).map(|(eta, y)| 1.0 / (eta * y * y)).collect();
        let beta: Vec<f64> = prob
            .groups
            .iter()
            .zip(&alpha)
            .map(|(members, a)| {
                let w: f64 = members.iter().map(|&i| prob.skew[i] * prob.skew[i] * inv_diag[i]).sum();
                a / (1.0 + a * w)
            })
            .collect();
        let mut schur = DMatrix::<f64>::zeros(rows, rows);
        for (col, h) in ext.cols.iter().zip(&inv_diag) {
            for (r1, a1) in col {
                for (r2, a2) in col {
                    schur[(*r1, *r2)] += h * a1 * a2;
                }
            }
        }
        for (members, b) in prob.groups.iter().zip(&beta) {
            let mut u = vec![0.0; rows];
            for &i in members {
                let v = prob.skew[i] * inv_diag[i];
                for (r, a) in &ext.cols[i] {
                    u[*r] += a * v;
                }
            }
            for r1 in 0..rows {
                if u[r1] == 0.0 {
                    continue;
                }
                for r2 in 0..rows {
                    schur[(r1, r2)] -= b * u[r1] * u[r2];
                }
            }
        }
        Some(NewtonSystem { inv_diag, alpha, beta, schur: SpdFactor::new(schur)? })
    }

    fn apply_h(&self, prob: &LogBarrierProjection<'_>, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.inv_diag).map(|(v, h)| v / h).collect();
        for (members, a) in prob.groups.iter().zip(&self.alpha) {
            let s: f64 = members.iter().map(|&i| prob.skew[i] * v[i]).sum();
            for &i in members {
                out[i] += a * prob.skew[i] * s;
            }
        }
        out
    }

    fn apply_h_inv(&self, prob: &LogBarrierProjection<'_>, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.inv_diag).map(|(v, h)| v * h).collect();
        for (members, b) in prob.groups.iter().zip(&self.beta) {
            let s: f64 = members.iter().map(|&i| prob.skew[i] * out[i]).sum();
            for &i in members {
                out[i] -= b * prob.skew[i] * self.inv_diag[i] * s;
            }
        }
        out
    }

    /// One pass of `H u + Aᵀ v = p`, `A u = q` through the Schur complement.
    fn solve_once(&self, prob: &LogBarrierProjection<'_>, ext: &Extended, p: &[f64], q: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let ahp = ext.apply(&self.apply_h_inv(prob, p));
        let rhs = DVector::from_iterator(q.len(), ahp.iter().zip(q).map(|(a, q)| a - q));
        let v: Vec<f64> = self.schur.solve(&rhs)?.iter().copied().collect();
        let atv = ext.apply_transpose(&v);
        let w: Vec<f64> = p.iter().zip(&atv).map(|(p, a)| p - a).collect();
        Some((self.apply_h_inv(prob, &w), v))
    }

    /// Solves the full system with two rounds of iterative refinement.
    fn solve(&self, prob: &LogBarrierProjection<'_>, ext: &Extended, p: &[f64], q: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut u, mut v) = self.solve_once(prob, ext, p, q)?;
        for _ in 0..2 {
            let hu = self.apply_h(prob, &u);
            let atv = ext.apply_transpose(&v);
            let r1: Vec<f64> = (0..p.len()).map(|i| p[i] - hu[i] - atv[i]).collect();
            let au = ext.apply(&u);
            let r2: Vec<f64> = q.iter().zip(&au).map(|(q, a)| q - a).collect();
            let (du, dv) = self.solve_once(prob, ext, &r1, &r2)?;
            u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
            v.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        }
        Some((u, v))
    }
}

impl LogBarrierProjection<'_> {
    fn check(&self) -> Result<(), OmdError> {
        let n = self.polytope.num_vars();
        let g = self.groups.len();
        if self.skew.len() != n || self.rates.len() != g || self.loss.len() != g || self.inv_center.len() != g {
            return Err(OmdError::Parameter("vector lengths differ from the problem".into()));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(OmdError::Parameter("learning rates must be positive".into()));
        }
        if self.loss.iter().chain(self.inv_center).any(|v| !v.is_finite()) {
            return Err(OmdError::Parameter("losses and centres must be finite".into()));
        }
        let mut seen = vec![false; n];
        for i in self.groups.iter().flatten() {
            if seen[*i] {
                return Err(OmdError::Parameter("groups overlap".into()));
            }
            seen[*i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(OmdError::Parameter("every variable must belong to a group".into()));
        }
        Ok(())
    }

    /// Skewed aggregates `Y_g`.
    pub fn aggregates(&self, x: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| g.iter().map(|i| self.skew[*i] * x[*i]).sum()).collect()
    }

    /// Unskewed aggregates `Σ_{i∈g} w_i x_i`.
    pub fn mass_aggregates(&self, x: &[f64]) -> Vec<f64> {
        let w = self.polytope.mass_weights();
        self.groups.iter().map(|g| g.iter().map(|i| w[*i] * x[*i]).sum()).collect()
    }

    /// The objective `F` (without the selection barrier).
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.aggregates(x)
            .iter()
            .enumerate()
            .map(|(g, &y)| {
                let (l, r, eta) = (self.loss[g], self.inv_center[g], self.rates[g]);
                if y <= 0.0 {
                    return f64::INFINITY;
                }
                if r > 0.0 {
                    l * y + (r * y - 1.0 - (r * y).ln()) / eta
                } else {
                    l * y - y.ln() / eta
                }
            })
            .sum()
    }

    fn extended(&self) -> Extended {
        let poly = self.polytope;
        let n = poly.num_vars();
        let m = poly.num_rows();
        let w = poly.mass_weights();
        let floors = if self.floor.is_some() { self.groups.len() } else { 0 };
        let budget_row = m + floors;
        let mut cols: Vec<Vec<(usize, f64)>> = (0..n).map(|i| poly.col(i).to_vec()).collect();
        if floors > 0 {
            for (g, members) in self.groups.iter().enumerate() {
                for &i in members {
                    cols[i].push((m + g, w[i]));
                }
            }
        }
        for (i, col) in cols.iter_mut().enumerate() {
            col.push((budget_row, w[i]));
        }
        for g in 0..floors {
            cols.push(vec![(m + g, -1.0)]);
        }
        cols.push(vec![(budget_row, 1.0)]);
        let mut rhs = poly.rhs().to_vec();
        rhs.extend(std::iter::repeat_n(self.floor.unwrap_or(0.0), floors));
        rhs.push(poly.budget());
        Extended { cols, rhs, n }
    }

    /// Gradient of the barrier objective `Φ_μ(z)`.
    fn gradient(&self, ext: &Extended, z: &[f64], mu: f64) -> Vec<f64> {
        let y = self.aggregates(&z[..ext.n]);
        let mut grad: Vec<f64> = z.iter().map(|v| -mu / v).collect();
        for (g, members) in self.groups.iter().enumerate() {
            let dy = self.loss[g] + (self.inv_center[g] - 1.0 / y[g]) / self.rates[g];
            for &i in members {
                grad[i] += self.skew[i] * dy;
            }
        }
        grad
    }

    /// Dual and primal residuals `(∇Φ + Aᵀλ, Az − b)`.
    fn residual(&self, ext: &Extended, z: &[f64], lambda: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rd = self.gradient(ext, z, mu);
        for (r, a) in rd.iter_mut().zip(ext.apply_transpose(lambda)) {
            *r += a;
        }
        let rp: Vec<f64> = ext.apply(z).iter().zip(&ext.rhs).map(|(a, b)| a - b).collect();
        (rd, rp)
    }

    /// Solves the Newton system at `z`, returning `(dz, λ⁺)`.
    fn newton_direction(&self, ext: &Extended, z: &[f64], mu: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let system = NewtonSystem::new(self, ext, z, mu)?;
        let grad = self.gradient(ext, z, mu);
        let p: Vec<f64> = grad.iter().map(|g| -g).collect();
        let q: Vec<f64> = ext.apply(z).iter().zip(&ext.rhs).map(|(a, b)| b - a).collect();
        let (dz, lambda) = system.solve(self, ext, &p, &q)?;
        (dz.iter().chain(&lambda).all(|d| d.is_finite())).then_some((dz, lambda))
    }

    /// Largest step in `(0, 1]` keeping every coordinate strictly positive.
    fn max_step(z: &[f64], dz: &[f64]) -> f64 {
        z.iter().zip(dz).filter(|(_, d)| **d < 0.0).map(|(v, d)| -0.99 * v / d).fold(1.0, f64::min)
    }

    /// `(max_i |z_i r_i| / max(1, max_i |z_i ∇_i Φ|), ‖Az − b‖_∞)`: relative stationarity and primal
    /// infeasibility.
    fn measures(&self, ext: &Extended, z: &[f64], lambda: &[f64], mu: f64) -> (f64, f64) {
        let (rd, rp) = self.residual(ext, z, lambda, mu);
        // Stationarity is measured relative to the objective's own scale
        // (`1/η` can reach the thousands), so that rescaling `F` by a
        // constant, which leaves the minimiser unchanged, leaves it unchanged.
        let scale = z
            .iter()
            .zip(self.gradient(ext, z, mu))
            .map(|(a, g)| (a * g).abs())
            .fold(1.0, f64::max);
        let stationarity = z.iter().zip(&rd).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max) / scale;
        let primal = rp.iter().map(|r| r.abs()).fold(0.0, f64::max);
        (stationarity, primal)
    }

    /// The barrier objective `Φ_μ(z) = F(x) − μ Σ ln z_i` (`+∞` outside the
    /// positive orthant).
    fn barrier_objective(&self, ext: &Extended, z: &[f64], mu: f64) -> f64 {
        if z.iter().any(|v| !(*v > 0.0)) {
            return f64::INFINITY;
        }
        self.objective(&z[..ext.n]) - mu * z.iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Damped Newton centring for a fixed barrier weight: descent on
    /// `Φ_μ` along directions that also cancel the (rounding-level) equality
    /// residual. Returns whether the stopping rule was met.
    #[allow(clippy::too_many_arguments)]
    fn center(
        &self,
        ext: &Extended,
        z: &mut Vec<f64>,
        lambda: &mut Vec<f64>,
        mu: f64,
        tolerance: f64,
        max_iter: usize,
        diag: &mut SolverDiagnostics,
    ) -> bool {
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        let mut value = self.barrier_objective(ext, z, mu);
        let mut progressed = false;
        for _ in 0..max_iter {
            let Some((dz, lambda_new)) = self.newton_direction(ext, z, mu) else {
                diag.fallback_steps += 1;
                return false;
            };
            *lambda = lambda_new;
            let (stationarity, primal) = self.measures(ext, z, lambda, mu);
            if stationarity <= tolerance && primal <= tolerance {
                return true;
            }
            // Rounding eventually stops the progress; give up once several
            // steps in a row neither halve the stationarity measure nor
            // lower the barrier objective beyond rounding.
            if stationarity < 0.5 * best {
                best = stationarity;
                stalled = 0;
            } else if progressed {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    return false;
                }
            }
            diag.iterations += 1;
            let grad = self.gradient(ext, z, mu);
            let slope: f64 = grad.iter().zip(&dz).map(|(g, d)| g * d).sum();
            let mut t = Self::max_step(z, &dz);
            let mut accepted = false;
            for _ in 0..60 {
                let zt: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + t * d).collect();
                let vt = self.barrier_objective(ext, &zt, mu);
                let sufficient = vt <= value + 1e-4 * t * slope.min(0.0);
                // Near the minimiser Φ is flat to rounding; a full step that
                // lowers the stationarity measure is accepted instead.
                let flat = vt.is_finite() && t >= 0.99 * Self::max_step(z, &dz) && t > 0.5 && {
                    let (st, pt) = self.measures(ext, &zt, lambda, mu);
                    st.max(pt) < stationarity.max(primal)
                };
                if vt.is_finite() && (sufficient || flat) {
                    progressed = value - vt > 1e-12 * (1.0 + value.abs());
                    *z = zt;
                    value = vt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return false;
            }
        }
        false
    }

    /// Solves the step starting from a point with strictly positive
    /// coordinates and strictly satisfied budget and floors (equality
    /// feasibility of `start` is not required). `warm` carries the previous
    /// multipliers.
    pub fn solve(
        &self,
        start: &[f64],
        warm: Option<&[f64]>,
        options: &SolverOptions,
    ) -> Result<BarrierSolution, OmdError> {
        self.check()?;
        let n = self.polytope.num_vars();
        if start.len() != n || start.iter().any(|v| !(*v > 0.0)) {
            return Err(OmdError::Parameter("start point must be strictly positive".into()));
        }
        let ext = self.extended();
        let mut z0 = start.to_vec();
        if let Some(f) = self.floor {
            z0.extend(self.mass_aggregates(start).iter().map(|m| m - f));
        }
        z0.push(self.polytope.budget() - self.polytope.total_mass(start));
        let mu = options.barrier;
        // A previous solution may sit on an active budget or floor with a
        // slack of order μ, which rounding in the equality residual can turn
        // slightly negative. Such rounding-level violations are replaced by a
        // positive slack; the infeasible-start iterations absorb the
        // resulting equality residual.
        let tolerance = SLACK_ROUNDING * (1.0 + self.polytope.budget());
        for s in &mut z0[n..] {
            if !(*s > 0.0) {
                if !(*s >= -tolerance) {
                    return Err(OmdError::Parameter("start point must satisfy the budget and floors strictly".into()));
                }
                *s = mu;
            }
        }
        let rows = ext.rhs.len();
        let mut diag = SolverDiagnostics::default();
        let mut z = z0.clone();
        let mut lambda = warm.filter(|w| w.len() == rows).map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; rows]);
        let mut ok = self.center(&ext, &mut z, &mut lambda, mu, options.inner_tolerance, options.warm_iterations, &mut diag);
        if !ok {
            // A warm attempt that stalled on rounding but already meets the
            // acceptance tolerance needs no restart.
            let (stationarity, primal) = self.measures(&ext, &z, &lambda, mu);
            ok = stationarity.max(primal).max(mu) <= options.kkt_tolerance;
        }
        if !ok {
            // Path following from a large barrier weight.
            diag.restarts += 1;
            z = z0;
            lambda = vec![0.0; rows];
            let mut level = 1.0;
            while level > mu {
                self.center(&ext, &mut z, &mut lambda, level, 1e-6, 200, &mut diag);
                level *= 0.1;
            }
            ok = self.center(&ext, &mut z, &mut lambda, mu, options.inner_tolerance, options.max_iterations, &mut diag);
        }
        // Keep whichever multiplier estimate certifies the point better: the
        // one the iterations verified, or a fresh Newton estimate.
        let (mut stationarity, mut primal) = self.measures(&ext, &z, &lambda, mu);
        if let Some((_, lambda_new)) = self.newton_direction(&ext, &z, mu) {
            let (st, pr) = self.measures(&ext, &z, &lambda_new, mu);
            if st.max(pr) < stationarity.max(primal) {
                (stationarity, primal, lambda) = (st, pr, lambda_new);
            }
        }
        diag.primal_residual = primal;
        diag.kkt_residual = stationarity.max(primal).max(mu);
        if !ok && !(diag.kkt_residual <= options.kkt_tolerance) {
            return Err(OmdError::SolverFailure { iterations: diag.iterations, residual: diag.kkt_residual });
        }
        z.truncate(n);
        Ok(BarrierSolution { x: z, multipliers: lambda, diagnostics: diag })
    }
}
