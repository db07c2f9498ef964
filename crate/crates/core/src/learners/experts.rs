//! The multi-scale experts meta-learner: exponential weights with one
//! learning rate per expert and a second-order loss correction.

use rand::{Rng, RngCore};

use crate::omd::multi_rate_exponential_weights;

/// Distribution over experts whose losses live on different scales `b(j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiScaleExperts {
    p: Vec<f64>,
    rates: Vec<f64>,
    scales: Vec<f64>,
    j0: i32,
}

impl MultiScaleExperts {
    /// Scales `b(j) = 2^{j0+j}` with `j0 = ⌈log₂ T_f⌉ − 1`,
    /// `N = max(1, ⌈log₂ K⌉ − j0)` and rates `η_j = 1/√(b(j) K max{D,16})`.
    pub fn new(fast_hitting_time: f64, episodes: usize, diameter: f64) -> Self {
        let j0 = fast_hitting_time.log2().ceil() as i32 - 1;
        let k = episodes as f64;
        let n = (k.log2().ceil() as i32 - j0).max(1);
        let scales: Vec<f64> = (1..=n).map(|j| 2f64.powi(j0 + j)).collect();
        let rates = scales.iter().map(|b| 1.0 / (b * k * diameter.max(16.0)).sqrt()).collect();
        Self::from_parts(j0, scales, rates)
    }

    /// Experts with explicit scales and rates; `p_1(j) = η_j/(N η_1)` for
    /// `j ≠ 1` and the remaining mass on the first expert.
    pub fn from_parts(j0: i32, scales: Vec<f64>, rates: Vec<f64>) -> Self {
        assert!(!scales.is_empty() && scales.len() == rates.len());
        let n = scales.len() as f64;
        let mut p: Vec<f64> = rates.iter().map(|e| e / (n * rates[0])).collect();
        p[0] = 1.0 - p[1..].iter().sum::<f64>();
        MultiScaleExperts { p, rates, scales, j0 }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn j0(&self) -> i32 {
        self.j0
    }

    /// Samples an expert index from the current distribution.
    pub fn sample(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, p) in self.p.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.p.len() - 1
    }

    /// Corrections `a(j) = 4 η_j ℓ(j)²`.
    pub fn corrections(&self, losses: &[f64]) -> Vec<f64> {
        losses.iter().zip(&self.rates).map(|(l, e)| 4.0 * e * l * l).collect()
    }

    /// One mirror-descent step on the losses `ℓ` (plus corrections).
    pub fn update(&mut self, losses: &[f64]) {
        let a = self.corrections(losses);
        self.p = multi_rate_exponential_weights(&self.p, &self.rates, losses, &a);
    }

    /// `(2 + ln(N √(b(j*)/b(1)))) / η_{j*} + 4 η_{j*} b(j*) Σ_k ℓ_k(j*)` for
    /// a benchmark expert `j*` (0-based) with cumulative loss `cumulative`.
    pub fn regret_bound(&self, j_star: usize, cumulative: f64) -> f64 {
        let n = self.len() as f64;
        let e = self.rates[j_star];
        let b = self.scales[j_star];
        (2.0 + (n * (b / self.scales[0]).sqrt()).ln()) / e + 4.0 * e * b * cumulative
    }
}
