//! Weighted relative-entropy steps onto a [`LinearPolytope`], solved by
//! damped Newton ascent on the Lagrange dual.
//!
//! The primal problem is
//!
//! ```text
//! min_x  Σ_i ω_i [ c_i x_i + (1/η) (x_i ln(x_i/y_i) − x_i + y_i) ]
//! s.t.   A x = b,  ⟨w, x⟩ ≤ T,  x ≥ 0
//! ```
//!
//! With multipliers `μ` (equalities) and `ν ≥ 0` (budget) the minimiser of
//! the Lagrangian is `x_i = y_i exp(η((Aᵀμ)_i − ν w_i)/ω_i − η c_i)`, so the
//! dual is smooth and concave and its Hessian is `−A diag(ηx/ω) Aᵀ`
//! (bordered by the budget row when `ν` is free). Non-negativity is implied.

use nalgebra::{DMatrix, DVector};

use super::{OmdError, SolverDiagnostics, SolverOptions};
use crate::linalg::spd_solve;
use crate::occupancy::LinearPolytope;

const MAX_EXPONENT: f64 = 700.0;

/// Consecutive Newton steps allowed without halving the gradient norm.
const STALL_LIMIT: usize = 8;

/// One weighted-entropy projection problem.
#[derive(Clone, Copy, Debug)]
pub struct EntropyProjection<'a> {
    pub polytope: &'a LinearPolytope,
    /// Per-variable weights `ω_i > 0` (1 for plain entropy, `1 + λh` when
    /// the regulariser acts on skewed coordinates).
    pub weights: &'a [f64],
    pub eta: f64,
    /// Linear coefficient `c_i` per unit of `ω_i x_i`.
    pub cost: &'a [f64],
    /// Reference point of the divergence in logarithms, `ln y` (`−∞` for a
    /// zero coordinate, which then stays zero). Working in logarithms keeps
    /// coordinates that decay geometrically over many steps from
    /// underflowing to an exact zero.
    pub log_center: &'a [f64],
}

/// Dual variables, kept between steps as a warm start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualPoint {
    pub mu: Vec<f64>,
    pub nu: f64,
}

/// Solution of an entropy projection.
#[derive(Clone, Debug)]
pub struct EntropySolution {
    pub x: Vec<f64>,
    /// `ln x`, exact even where `x` underflows; the next step's reference.
    pub log_x: Vec<f64>,
    pub dual: DualPoint,
    pub diagnostics: SolverDiagnostics,
}

impl EntropyProjection<'_> {
    fn check(&self) -> Result<(), OmdError> {
        let n = self.polytope.num_vars();
        if self.weights.len() != n || self.cost.len() != n || self.log_center.len() != n {
            return Err(OmdError::Parameter("vector lengths differ from the polytope".into()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(OmdError::Parameter(format!("learning rate {} must be positive", self.eta)));
        }
        if self.log_center.iter().any(|l| l.is_nan() || *l == f64::INFINITY)
            || self.log_center.iter().all(|l| *l == f64::NEG_INFINITY)
        {
            return Err(OmdError::Parameter("reference point must be finite, non-negative and not identically zero".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(OmdError::Parameter("weights must be strictly positive".into()));
        }
        Ok(())
    }

    /// The primal objective.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let inv_eta = 1.0 / self.eta;
        x.iter()
            .zip(self.weights)
            .zip(self.cost.iter().zip(self.log_center))
            .map(|((&x, &w), (&c, &ly))| {
                let y = ly.exp();
                let ent = if x <= 0.0 {
                    y
                } else if ly == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    x * (x.ln() - ly) - x + y
                };
                w * (c * x + inv_eta * ent)
            })
            .sum()
    }

    /// Logarithm of the Lagrangian minimiser for given multipliers.
    fn log_primal(&self, mu: &[f64], nu: f64) -> Vec<f64> {
        let z = self.polytope.apply_transpose(mu);
        let mass = self.polytope.mass_weights();
        (0..z.len())
            .map(|i| {
                let e = self.eta * ((z[i] - nu * mass[i]) / self.weights[i] - self.cost[i]);
                (self.log_center[i] + e).min(MAX_EXPONENT)
            })
            .collect()
    }

    /// Lagrangian minimiser for given multipliers.
    fn primal(&self, mu: &[f64], nu: f64) -> Vec<f64> {
        self.log_primal(mu, nu).iter().map(|l| l.exp()).collect()
    }

    /// Dual function value at `(μ, ν)` given the matching primal point.
    fn dual_value(&self, mu: &[f64], nu: f64, x: &[f64]) -> f64 {
        let inv_eta = 1.0 / self.eta;
        let mut g: f64 = x
            .iter()
            .zip(self.log_center)
            .zip(self.weights)
            .map(|((x, ly), w)| w * inv_eta * (ly.exp() - x))
            .sum();
        g += mu.iter().zip(self.polytope.rhs()).map(|(m, b)| m * b).sum::<f64>();
        g - nu * self.polytope.budget()
    }

    /// Dual gradient: equality residuals `b − Ax`, then `⟨w,x⟩ − T` when the
    /// budget multiplier is free.
    fn gradient(&self, x: &[f64], with_budget: bool) -> Vec<f64> {
        let ax = self.polytope.apply(x);
        let mut g: Vec<f64> = self.polytope.rhs().iter().zip(&ax).map(|(b, a)| b - a).collect();
        if with_budget {
            g.push(self.polytope.total_mass(x) - self.polytope.budget());
        }
        g
    }

    /// Negated dual Hessian.
    fn curvature(&self, x: &[f64], with_budget: bool) -> DMatrix<f64> {
        let m = self.polytope.num_rows();
        let dim = m + usize::from(with_budget);
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mass = self.polytope.mass_weights();
        for i in 0..x.len() {
            let d = self.eta * x[i] / self.weights[i];
            if d == 0.0 {
                continue;
            }
            let col = self.polytope.col(i);
            for (r1, a1) in col {
                for (r2, a2) in col {
                    h[(*r1, *r2)] += d * a1 * a2;
                }
                if with_budget {
                    h[(*r1, m)] -= d * a1 * mass[i];
                    h[(m, *r1)] -= d * a1 * mass[i];
                }
            }
            if with_budget {
                h[(m, m)] += d * mass[i] * mass[i];
            }
        }
        h
    }

    /// Maximises the dual over `μ` (and `ν ≥ 0` when `with_budget`).
    fn ascend(
        &self,
        mu: &mut Vec<f64>,
        nu: &mut f64,
        with_budget: bool,
        options: &SolverOptions,
        diag: &mut SolverDiagnostics,
    ) -> Vec<f64> {
        let m = self.polytope.num_rows();
        let mut x = self.primal(mu, *nu);
        let mut value = self.dual_value(mu, *nu, &x);
        let mut best_gnorm = f64::INFINITY;
        let mut stalled = 0;
        let mut progressed = false;
        loop {
            let grad = self.gradient(&x, with_budget);
            let gnorm = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
            if gnorm <= options.inner_tolerance || diag.iterations >= options.max_iterations {
                return x;
            }
            // In floating point the gradient eventually stops shrinking; stop
            // once several Newton steps in a row neither halve it nor raise
            // the dual value beyond rounding.
            if gnorm < 0.5 * best_gnorm {
                best_gnorm = gnorm;
                stalled = 0;
            } else if progressed {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    return x;
                }
            }
            diag.iterations += 1;
            let newton = spd_solve(self.curvature(&x, with_budget), &DVector::from_vec(grad.clone()));
            let (dir, is_newton) = match newton {
                Some(d) if d.iter().all(|v| v.is_finite()) => (d.iter().copied().collect::<Vec<_>>(), true),
                _ => (grad.clone(), false),
            };
            if !is_newton {
                diag.fallback_steps += 1;
            }
            let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let dir = if slope > 0.0 {
                dir
            } else {
                slope = grad.iter().map(|g| g * g).sum();
                grad.clone()
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial_mu: Vec<f64> = mu.iter().zip(&dir).map(|(m, d)| m + t * d).collect();
                let trial_nu = if with_budget { (*nu + t * dir[m]).max(0.0) } else { *nu };
                let trial_x = self.primal(&trial_mu, trial_nu);
                let trial_value = self.dual_value(&trial_mu, trial_nu, &trial_x);
                let sufficient = trial_value >= value + 1e-4 * t * slope;
                // Near the optimum the dual value is flat to rounding; accept a
                // full step that shrinks the gradient instead.
                let flat = t == 1.0 && {
                    let g = self.gradient(&trial_x, with_budget);
                    g.iter().map(|g| g.abs()).fold(0.0, f64::max) < gnorm
                };
                if trial_value.is_finite() && (sufficient || flat) {
                    *mu = trial_mu;
                    *nu = trial_nu;
                    x = trial_x;
                    progressed = trial_value - value > 1e-12 * (1.0 + value.abs());
                    value = trial_value.max(value);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No ascent possible in floating point; the gradient check
                // above decides whether the point is good enough.
                return x;
            }
        }
    }

    /// Solves the projection, optionally warm-started from a previous dual.
    pub fn solve(&self, warm: Option<&DualPoint>, options: &SolverOptions) -> Result<EntropySolution, OmdError> {
        self.check()?;
        let m = self.polytope.num_rows();
        let mut diag = SolverDiagnostics::default();
        let (mut mu, mut nu) = match warm {
            Some(d) if d.mu.len() == m => (d.mu.clone(), d.nu.max(0.0)),
            _ => (vec![0.0; m], 0.0),
        };
        let mut x;
        if nu > 0.0 {
            x = self.ascend(&mut mu, &mut nu, true, options, &mut diag);
            if nu <= 0.0 {
                nu = 0.0;
                x = self.ascend(&mut mu, &mut nu, false, options, &mut diag);
            }
        } else {
            x = self.ascend(&mut mu, &mut nu, false, options, &mut diag);
        }
        if self.polytope.total_mass(&x) > self.polytope.budget() + options.inner_tolerance {
            x = self.ascend(&mut mu, &mut nu, true, options, &mut diag);
        }
        let primal = self.polytope.equality_residual(&x);
        let slack = self.polytope.total_mass(&x) - self.polytope.budget();
        // Complementarity `ν·slack`, measured as a constraint violation so that
        // it does not scale with the size of the multiplier.
        let complementarity = nu.min(1.0) * slack.abs();
        diag.primal_residual = primal.max(slack.max(0.0));
        diag.kkt_residual = diag.primal_residual.max(complementarity);
        if !(diag.kkt_residual <= options.kkt_tolerance) || x.iter().any(|v| !v.is_finite()) {
            return Err(OmdError::SolverFailure {
                iterations: diag.iterations,
                residual: diag.kkt_residual,
            });
        }
        let log_x = self.log_primal(&mu, nu);
        Ok(EntropySolution { x, log_x, dual: DualPoint { mu, nu }, diagnostics: diag })
    }
}
