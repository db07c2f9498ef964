//! Learner configuration and the parameter formulas of each algorithm.

use serde::{Deserialize, Serialize};

use super::{Algorithm, AuditSchedule, LearnerError};
use crate::mdp::{FastPolicy, SspMdp};

/// Default confidence level `δ`.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Optional replacements for derived constants. They exist for exploration
/// only; `None` everywhere reproduces the algorithms' own formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

/// Inputs of a learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Number of episodes `K`.
    pub episodes: usize,
    /// Upper bound `T` on the optimal policy's expected hitting time.
    pub budget: Option<f64>,
    /// First-stage horizon `H1` (default `⌈K^{1/3}⌉`).
    pub h1: Option<usize>,
    /// Confidence level `δ`.
    pub delta: f64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub audit: AuditSchedule,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, episodes: usize, budget: Option<f64>) -> Self {
        LearnerConfig {
            algorithm,
            episodes,
            budget,
            h1: None,
            delta: DEFAULT_DELTA,
            overrides: Overrides::default(),
            audit: AuditSchedule::default(),
        }
    }
}

/// Derived constants of a learner. Fields that an algorithm does not use
/// are left at zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Parameters {
    pub algorithm: Option<Algorithm>,
    pub episodes: usize,
    pub budget: f64,
    pub delta: f64,
    /// Diameter `D`.
    pub diameter: f64,
    /// `T^{π^f}(s0)`.
    pub fast_hitting_time: f64,
    /// `S·A = |Γ|`.
    pub num_pairs: usize,
    pub eta: f64,
    pub lambda: f64,
    pub h1: usize,
    pub h2: usize,
    /// Rate growth factor `β` (bandit-hp).
    pub beta: f64,
    /// Bias coefficient `γ` (bandit-hp).
    pub gamma: f64,
    /// Constant `C` (bandit-hp).
    pub c_const: f64,
    /// Floor `1/(T K⁴)` on every aggregate (bandit-hp).
    pub floor: f64,
    /// Initial threshold `ρ_1 = 2T` (bandit-hp).
    pub rho1: f64,
    /// Hitting-time value used in place of `T_*` (bandit-hp: `T − 1`).
    pub t_star: f64,
    /// Adaptive: `j0`, `N`, scales `b(j)` and rates `η_j`.
    pub j0: i32,
    pub experts: usize,
    pub scales: Vec<f64>,
    pub expert_rates: Vec<f64>,
    /// Conditions required by the analysis that do not hold for this
    /// configuration (the learner still runs).
    pub warnings: Vec<String>,
}

/// `⌈4 D ln(4K/δ)⌉`.
pub fn second_stage_horizon(diameter: f64, episodes: usize, delta: f64) -> usize {
    (4.0 * diameter * (4.0 * episodes as f64 / delta).ln()).ceil() as usize
}

/// `⌈K^{1/3}⌉`, computed exactly for perfect cubes.
pub fn default_first_stage_horizon(episodes: usize) -> usize {
    let mut h = (episodes as f64).cbrt().round() as usize;
    while h.pow(3) < episodes {
        h += 1;
    }
    while h > 1 && (h - 1).pow(3) >= episodes {
        h -= 1;
    }
    h.max(1)
}

/// SSP-O-REPS learning rate `min{1/2, √(T ln(SA·T)/(D K))}`.
pub fn oreps_eta(budget: f64, num_pairs: usize, diameter: f64, episodes: usize) -> f64 {
    let log = (num_pairs as f64 * budget).ln().max(0.0);
    (budget * log / (diameter * episodes as f64)).sqrt().min(0.5)
}

impl Parameters {
    pub fn derive(mdp: &SspMdp, fast: &FastPolicy, config: &LearnerConfig) -> Result<Self, LearnerError> {
        let k = config.episodes;
        if k == 0 {
            return Err(LearnerError::Parameter("K must be at least 1".into()));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(LearnerError::Parameter(format!("δ = {} must lie in (0, 1)", config.delta)));
        }
        let alg = config.algorithm;
        let kf = k as f64;
        let d = fast.diameter;
        let sa = mdp.num_pairs();
        let t_fast = fast.initial_hitting_time(mdp);
        let mut p = Parameters {
            algorithm: Some(alg),
            episodes: k,
            delta: config.delta,
            diameter: d,
            fast_hitting_time: t_fast,
            num_pairs: sa,
            ..Parameters::default()
        };
        if alg.needs_budget() {
            let t = config
                .budget
                .ok_or_else(|| LearnerError::Parameter(format!("algorithm {alg} requires the hitting-time bound T")))?;
            if !(t.is_finite() && t > 0.0) {
                return Err(LearnerError::Parameter(format!("T = {t} must be positive")));
            }
            if t < t_fast {
                return Err(LearnerError::Parameter(format!(
                    "T = {t} is below the fastest expected hitting time {t_fast:.6}; the decision set is empty"
                )));
            }
            p.budget = t;
        }
        if alg.is_layered() {
            p.h1 = config.h1.unwrap_or_else(|| default_first_stage_horizon(k));
            if p.h1 == 0 {
                return Err(LearnerError::Parameter("H1 must be at least 1".into()));
            }
            p.h2 = second_stage_horizon(d, k, config.delta).max(1);
        }
        let t = p.budget;
        match alg {
            Algorithm::Oreps => {
                p.eta = oreps_eta(t, sa, d, k);
            }
            Algorithm::Adaptive => {
                p.j0 = t_fast.log2().ceil() as i32 - 1;
                let n = (kf.log2().ceil() as i32 - p.j0).max(1);
                p.experts = n as usize;
                p.scales = (1..=n).map(|j| 2f64.powi(p.j0 + j)).collect();
                p.expert_rates = p.scales.iter().map(|b| 1.0 / (b * kf * d.max(16.0)).sqrt()).collect();
                for (j, (b, e)) in p.scales.iter().zip(&p.expert_rates).enumerate() {
                    if e * b > 0.25 {
                        p.warnings.push(format!("expert {}: η_j·b(j) = {:.3} exceeds 1/4", j + 1, e * b));
                    }
                }
            }
            Algorithm::Skewed => {
                p.eta = (t / (d * kf)).sqrt().min(0.5);
                p.lambda = ((1.0 / config.delta).ln() / (d * t * kf)).sqrt();
            }
            Algorithm::Bandit => {
                p.eta = (sa as f64 / (d * t * kf)).sqrt();
                p.lambda = 8.0 * p.eta;
            }
            Algorithm::BanditHp => {
                if k < 2 {
                    return Err(LearnerError::Parameter("bandit-hp needs K ≥ 2 (β = e^{1/(7 ln K)})".into()));
                }
                let ln_k = kf.ln();
                p.t_star = (t - 1.0).max(1.0);
                p.c_const = (t * kf.powi(4)).log2().ceil() * (t * t * kf.powi(9)).log2().ceil();
                p.beta = (1.0 / (7.0 * ln_k)).exp();
                p.eta = (sa as f64 * (1.0 / config.delta).ln() / (d * p.t_star * kf)).sqrt();
                let inner = 1.0 + p.c_const * (8.0 * (p.c_const * sa as f64 / config.delta).ln()).sqrt();
                p.gamma = 100.0 * p.eta * ln_k * inner * inner;
                p.floor = 1.0 / (t * kf.powi(4));
                p.rho1 = 2.0 * t;
            }
        }
        if let Some(eta) = config.overrides.eta {
            p.eta = eta;
        }
        if let Some(gamma) = config.overrides.gamma {
            p.gamma = gamma;
        }
        if alg == Algorithm::BanditHp {
            p.lambda = 40.0 * p.eta + 2.0 * p.gamma;
        }
        if let Some(lambda) = config.overrides.lambda {
            p.lambda = lambda;
        }
        if alg != Algorithm::Adaptive && !(p.eta.is_finite() && p.eta > 0.0) {
            return Err(LearnerError::Parameter(format!("learning rate η = {} must be positive", p.eta)));
        }
        if alg == Algorithm::BanditHp {
            let horizon = (p.h1 + p.h2) as f64;
            if p.gamma * horizon > 1.0 {
                p.warnings.push(format!(
                    "γ·H = {:.3e} > 1: the biased loss ĉ − γ b̂ can be negative (the analysis assumes K large enough)",
                    p.gamma * horizon
                ));
            }
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::compute_fast_policy;
    use crate::toy;

    #[test]
    fn cube_root_horizon() {
        assert_eq!(default_first_stage_horizon(1000), 10);
        assert_eq!(default_first_stage_horizon(1001), 11);
        assert_eq!(default_first_stage_horizon(1), 1);
        assert_eq!(default_first_stage_horizon(16384), 26);
    }

    #[test]
    fn second_stage_horizon_example() {
        assert_eq!(second_stage_horizon(4.0, 1000, 0.1), 170);
    }

    #[test]
    fn bandit_rates_follow_their_formulas() {
        let m = toy::three_state();
        let fast = compute_fast_policy(&m).unwrap();
        let d = fast.diameter;
        let cfg = LearnerConfig::new(Algorithm::Bandit, 4096, Some(5.0));
        let p = Parameters::derive(&m, &fast, &cfg).unwrap();
        assert!((p.eta - (6.0 / (d * 5.0 * 4096.0)).sqrt()).abs() < 1e-15);
        assert!((p.lambda - 8.0 * p.eta).abs() < 1e-15);

        let cfg = LearnerConfig::new(Algorithm::BanditHp, 4096, Some(5.0));
        let p = Parameters::derive(&m, &fast, &cfg).unwrap();
        let k: f64 = 4096.0;
        assert!((p.beta - (1.0 / (7.0 * k.ln())).exp()).abs() < 1e-15);
        assert_eq!(p.c_const, (5.0 * k.powi(4)).log2().ceil() * (25.0 * k.powi(9)).log2().ceil());
        assert!((p.lambda - (40.0 * p.eta + 2.0 * p.gamma)).abs() < 1e-9 * p.lambda);
        assert_eq!(p.rho1, 10.0);
    }

    #[test]
    fn adaptive_needs_no_budget_but_others_do() {
        let m = toy::three_state();
        let fast = compute_fast_policy(&m).unwrap();
        assert!(Parameters::derive(&m, &fast, &LearnerConfig::new(Algorithm::Adaptive, 100, None)).is_ok());
        assert!(Parameters::derive(&m, &fast, &LearnerConfig::new(Algorithm::Skewed, 100, None)).is_err());
    }
}
