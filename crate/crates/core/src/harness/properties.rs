//! Monte-Carlo property suite: exact identities, sampling checks of visit
//! counts, second-moment bounds, the hitting-time tail bound and estimator
//! unbiasedness, each reported with its margin.
//!
//! Conventions: an inequality `E[X] ≤ B` passes when `mean + 4·SE ≤ B`; an
//! equality `E[X] = v` passes when `|mean − v| ≤ 4·SE` for every coordinate
//! (plus `1e-12` to absorb rounding when the variance is zero).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::learners::estimator::{aggregated_counts, bias_vector, estimate_costs, expected_bias, group_costs};
use crate::mdp::{
    compute_cost_to_go, compute_fast_policy, compute_hitting_times, simulate_episode, CostFunction, SimulationOptions,
    SspMdp, StationaryPolicy, Successor, ROW_SUM_TOLERANCE,
};
use crate::occupancy::{flow_residual, occupancy_of_policy, simulate_layered, LayeredPolicy, LoopFree};

/// Sample counts below this trigger a low-power warning.
pub const LOW_POWER_SAMPLES: usize = 100_000;

const Z: f64 = 4.0;
const ROUNDING: f64 = 1e-12;

/// Result of one check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// The tested statistic (a mean, or the worst deviation for equalities).
    pub statistic: f64,
    /// The bound it is compared with (the tolerance for equalities).
    pub bound: f64,
    pub std_error: f64,
    /// Distance to failure; non-negative iff the check passed.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl PropertyCheck {
    fn exact(name: &str, deviation: f64, tolerance: f64) -> Self {
        let margin = if deviation.is_finite() { tolerance - deviation } else { f64::NEG_INFINITY };
        PropertyCheck {
            name: name.into(),
            passed: margin >= 0.0,
            statistic: deviation,
            bound: tolerance,
            std_error: 0.0,
            margin,
            detail: None,
        }
    }

    fn upper(name: &str, m: &Moments, bound: f64) -> Self {
        let se = m.std_error();
        let margin = bound - m.mean() - Z * se;
        PropertyCheck { name: name.into(), passed: margin >= 0.0, statistic: m.mean(), bound, std_error: se, margin, detail: None }
    }

    /// Worst coordinate of an equality check, by margin.
    fn equal(name: &str, coords: impl IntoIterator<Item = (Moments, f64)>) -> Self {
        let mut worst: Option<PropertyCheck> = None;
        for (m, target) in coords {
            let se = m.std_error();
            let dev = (m.mean() - target).abs();
            let tol = Z * se + ROUNDING;
            if worst.as_ref().map_or(true, |w| tol - dev < w.margin) {
                worst = Some(PropertyCheck {
                    name: name.into(),
                    passed: tol - dev >= 0.0,
                    statistic: dev,
                    bound: tol,
                    std_error: se,
                    margin: tol - dev,
                    detail: None,
                });
            }
        }
        worst.unwrap_or_else(|| PropertyCheck::exact(name, 0.0, ROUNDING))
    }

    fn failed(name: &str, detail: String) -> Self {
        PropertyCheck {
            name: name.into(),
            passed: false,
            statistic: f64::NAN,
            bound: f64::NAN,
            std_error: f64::NAN,
            margin: f64::NEG_INFINITY,
            detail: Some(detail),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Every transition row sums to one.
pub fn check_row_stochastic(mdp: &SspMdp) -> PropertyCheck {
    let (worst, label) = mdp
        .pairs()
        .map(|p| ((mdp.row_total(p) - 1.0).abs(), p))
        .fold((0.0, None), |acc, (d, p)| if d > acc.0 { (d, Some(p)) } else { acc });
    let check = PropertyCheck::exact("rows are stochastic", worst, ROW_SUM_TOLERANCE);
    match label {
        Some(p) if !check.passed => check.with_detail(format!("row {} sums to {}", mdp.pair_label(p), mdp.row_total(p))),
        _ => check,
    }
}

/// `⟨q_π, c⟩ = J^π(s0)`, `Σ q_π = T^π(s0)` and exact flow conservation.
pub fn check_occupancy_identities(mdp: &SspMdp, policy: &StationaryPolicy, cost: &CostFunction) -> PropertyCheck {
    const NAME: &str = "occupancy identities";
    let result = (|| -> Result<f64, String> {
        let q = occupancy_of_policy(mdp, policy).map_err(|e| e.to_string())?;
        let s0 = mdp.initial().0;
        let j = compute_cost_to_go(mdp, policy, cost.as_slice()).map_err(|e| e.to_string())?[s0];
        let t = compute_hitting_times(mdp, policy).map_err(|e| e.to_string())?[s0];
        let dev = (cost.dot(&q) - j).abs().max((q.iter().sum::<f64>() - t).abs()).max(flow_residual(mdp, &q));
        Ok(dev)
    })();
    match result {
        Ok(dev) => PropertyCheck::exact(NAME, dev, 1e-8),
        Err(e) => PropertyCheck::failed(NAME, e),
    }
}

fn options() -> SimulationOptions {
    SimulationOptions::default()
}

/// Monte-Carlo visit means equal `q_π` per pair, and the sampled visits
/// balance the declared flow equations at every state.
pub fn check_visit_means<R: Rng>(mdp: &SspMdp, policy: &StationaryPolicy, samples: usize, rng: &mut R) -> Vec<PropertyCheck> {
    const MEANS: &str = "visit means match occupancy";
    const FLOW: &str = "sampled visits conserve flow";
    let q = match occupancy_of_policy(mdp, policy) {
        Ok(q) => q,
        Err(e) => return vec![PropertyCheck::failed(MEANS, e.to_string()), PropertyCheck::failed(FLOW, e.to_string())],
    };
    let mut visits = vec![Moments::default(); mdp.num_pairs()];
    let mut balance = vec![Moments::default(); mdp.num_states()];
    let mut b = vec![0.0; mdp.num_states()];
    for _ in 0..samples {
        let trace = simulate_episode(mdp, policy, None, rng, options());
        b.iter_mut().for_each(|v| *v = 0.0);
        b[mdp.initial().0] = -1.0;
        for p in mdp.pairs() {
            let n = trace.visits[p.0] as f64;
            visits[p.0].push(n);
            if n == 0.0 {
                continue;
            }
            b[mdp.pair_state(p).0] += n;
            for t in mdp.transitions(p) {
                if let Successor::State(x) = t.next {
                    b[x.0] -= t.prob * n;
                }
            }
        }
        for (m, v) in balance.iter_mut().zip(&b) {
            m.push(*v);
        }
    }
    vec![
        PropertyCheck::equal(MEANS, visits.into_iter().zip(q)),
        PropertyCheck::equal(FLOW, balance.into_iter().map(|m| (m, 0.0))),
    ]
}

/// `P(steps > m) ≤ 2 e^{−m/(4τ)}` for `m ∈ {4τ, 8τ, 16τ}`, `τ = max_s T^π(s)`.
pub fn check_hitting_tail<R: Rng>(mdp: &SspMdp, policy: &StationaryPolicy, samples: usize, rng: &mut R) -> Vec<PropertyCheck> {
    let tau = match compute_hitting_times(mdp, policy) {
        Ok(t) => t.into_iter().fold(0.0, f64::max),
        Err(e) => return vec![PropertyCheck::failed("hitting-time tail", e.to_string())],
    };
    let steps: Vec<u64> = (0..samples).map(|_| simulate_episode(mdp, policy, None, rng, options()).steps).collect();
    [4.0, 8.0, 16.0]
        .iter()
        .map(|mult| {
            let m = mult * tau;
            let mut tail = Moments::default();
            for s in &steps {
                tail.push(if *s as f64 > m { 1.0 } else { 0.0 });
            }
            PropertyCheck::upper(&format!("hitting-time tail at m = {mult}τ"), &tail, 2.0 * (-m / (4.0 * tau)).exp())
                .with_detail(format!("τ = {tau}"))
        })
        .collect()
}

/// `E⟨N, c⟩² ≤ 2⟨q_π, J^π⟩` for a stationary policy.
pub fn check_stationary_variance<R: Rng>(
    mdp: &SspMdp,
    policy: &StationaryPolicy,
    cost: &CostFunction,
    samples: usize,
    rng: &mut R,
) -> PropertyCheck {
    const NAME: &str = "second moment of episode cost (stationary)";
    let bound = (|| -> Result<f64, String> {
        let q = occupancy_of_policy(mdp, policy).map_err(|e| e.to_string())?;
        let j = compute_cost_to_go(mdp, policy, cost.as_slice()).map_err(|e| e.to_string())?;
        Ok(2.0 * mdp.pairs().map(|p| q[p.0] * j[mdp.pair_state(p).0]).sum::<f64>())
    })();
    let bound = match bound {
        Ok(b) => b,
        Err(e) => return PropertyCheck::failed(NAME, e),
    };
    let mut m = Moments::default();
    for _ in 0..samples {
        let trace = simulate_episode(mdp, policy, Some(cost), rng, options());
        m.push(trace.cost * trace.cost);
    }
    PropertyCheck::upper(NAME, &m, bound)
}

/// A layered policy executed through the loop-free reduction.
#[derive(Clone, Copy)]
pub struct LayeredSetup<'a> {
    pub loop_free: &'a LoopFree,
    pub policy: &'a LayeredPolicy,
    pub fast: &'a StationaryPolicy,
}

fn layered_samples<R: Rng>(mdp: &SspMdp, setup: LayeredSetup<'_>, samples: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|_| simulate_layered(mdp, setup.loop_free, setup.policy, setup.fast, None, rng, options()).1 .0)
        .collect()
}

/// Layered visit frequencies under the execution rule equal the layered
/// occupancy, per variable.
pub fn check_layered_visits<R: Rng>(mdp: &SspMdp, setup: LayeredSetup<'_>, samples: usize, rng: &mut R) -> PropertyCheck {
    let q = setup.loop_free.occupancy_of(mdp, setup.policy);
    let mut m = vec![Moments::default(); q.len()];
    for counts in layered_samples(mdp, setup, samples, rng) {
        for (mi, c) in m.iter_mut().zip(&counts) {
            mi.push(*c);
        }
    }
    PropertyCheck::equal("layered visit frequencies match layered occupancy", m.into_iter().zip(q))
}

/// `E⟨Ñ, c̃⟩² ≤ 2⟨q, h∘c̃⟩` in the loop-free reduction.
pub fn check_layered_variance<R: Rng>(
    mdp: &SspMdp,
    setup: LayeredSetup<'_>,
    cost: &CostFunction,
    samples: usize,
    rng: &mut R,
) -> PropertyCheck {
    let lf = setup.loop_free;
    let q = lf.occupancy_of(mdp, setup.policy);
    let c = group_costs(lf, cost.as_slice());
    let bound = 2.0 * lf.layer_moment(&q).iter().zip(&c).map(|(m, c)| m * c).sum::<f64>();
    let mut m = Moments::default();
    for counts in layered_samples(mdp, setup, samples, rng) {
        let n = lf.aggregate(&counts);
        let x: f64 = n.iter().zip(&c).map(|(n, c)| n * c).sum();
        m.push(x * x);
    }
    PropertyCheck::upper("second moment of episode cost (loop-free)", &m, bound)
}

/// `E[Ñ(s,a)² c(s,a)²] ≤ 2 q(s,a) b(s,a)` for every pair (worst margin).
pub fn check_squared_estimate_bound<R: Rng>(
    mdp: &SspMdp,
    setup: LayeredSetup<'_>,
    cost: &CostFunction,
    samples: usize,
    rng: &mut R,
) -> PropertyCheck {
    let lf = setup.loop_free;
    let q = lf.occupancy_of(mdp, setup.policy);
    let c = group_costs(lf, cost.as_slice());
    let moment = lf.layer_moment(&q);
    let mut m = vec![Moments::default(); c.len()];
    for counts in layered_samples(mdp, setup, samples, rng) {
        let n = aggregated_counts(lf, &crate::occupancy::LayeredCounts(counts));
        for g in 0..c.len() {
            m[g].push((n[g] * c[g]).powi(2));
        }
    }
    (0..c.len())
        .map(|g| PropertyCheck::upper("squared count-cost bound per pair", &m[g], 2.0 * moment[g] * c[g]))
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("at least one pair")
}

/// `E[ĉ] = c` and `E[b̂] = b` for every pair with positive occupancy.
pub fn check_bandit_estimators<R: Rng>(
    mdp: &SspMdp,
    setup: LayeredSetup<'_>,
    cost: &CostFunction,
    samples: usize,
    rng: &mut R,
) -> Vec<PropertyCheck> {
    const COSTS: &str = "importance-weighted cost estimate is unbiased";
    const BIAS: &str = "bias-term estimate is unbiased";
    let lf = setup.loop_free;
    let q = lf.occupancy_of(mdp, setup.policy);
    let agg = lf.aggregate(&q);
    let c = group_costs(lf, cost.as_slice());
    let b = expected_bias(lf, &q, cost.as_slice());
    let groups = c.len();
    let mut mc = vec![Moments::default(); groups];
    let mut mb = vec![Moments::default(); groups];
    for _ in 0..samples {
        let (trace, counts) = simulate_layered(mdp, lf, setup.policy, setup.fast, Some(cost), rng, options());
        let observed: Vec<Option<f64>> =
            cost.as_slice().iter().zip(&trace.visits).map(|(c, n)| (*n > 0).then_some(*c)).collect();
        match estimate_costs(mdp, lf, &q, &counts, &observed) {
            Ok(est) => {
                let bias = bias_vector(lf, &q, &est);
                for g in 0..groups {
                    mc[g].push(est[g]);
                    mb[g].push(bias[g]);
                }
            }
            Err(e) => {
                return vec![PropertyCheck::failed(COSTS, e.to_string()), PropertyCheck::failed(BIAS, e.to_string())]
            }
        }
    }
    let live: Vec<usize> = (0..groups).filter(|g| agg[*g] > 0.0).collect();
    vec![
        PropertyCheck::equal(COSTS, live.iter().map(|g| (mc[*g], c[*g]))),
        PropertyCheck::equal(BIAS, live.iter().map(|g| (mb[*g], b[*g]))),
    ]
}

/// Settings of [`property_suite`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyOptions {
    /// Episodes per Monte-Carlo check.
    pub samples: usize,
    pub seed: u64,
    /// First-stage horizon of the loop-free reduction used by the layered
    /// checks.
    pub h1: usize,
    /// Cost function used by the checks (default: uniform draws from `seed`).
    pub cost: Option<Vec<f64>>,
}

impl Default for PropertyOptions {
    fn default() -> Self {
        PropertyOptions { samples: LOW_POWER_SAMPLES, seed: 0, h1: 4, cost: None }
    }
}

/// All checks with their margins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyLedger {
    pub samples: usize,
    pub checks: Vec<PropertyCheck>,
    pub warnings: Vec<String>,
}

impl PropertyLedger {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every check on `mdp` with the policy that mixes the uniform policy
/// and the fast policy half-and-half (proper whenever the fast policy is).
pub fn property_suite(mdp: &SspMdp, opts: &PropertyOptions) -> PropertyLedger {
    let mut warnings = Vec::new();
    if opts.samples < LOW_POWER_SAMPLES {
        warnings.push(format!(
            "{} samples per check is below {LOW_POWER_SAMPLES}; the 4-SE tests have low power",
            opts.samples
        ));
    }
    if mdp.num_states() > 8 {
        warnings.push(format!("{} states; the suite is sized for instances with at most 8", mdp.num_states()));
    }
    let mut checks = vec![check_row_stochastic(mdp)];
    let fast = match compute_fast_policy(mdp) {
        Ok(f) => f,
        Err(e) => {
            checks.push(PropertyCheck::failed("fast policy exists", e.to_string()));
            return PropertyLedger { samples: opts.samples, checks, warnings };
        }
    };
    let uniform = StationaryPolicy::uniform(mdp);
    let mixed: Vec<f64> = uniform.as_slice().iter().zip(fast.policy.as_slice()).map(|(u, f)| 0.5 * (u + f)).collect();
    let policy = StationaryPolicy::from_probs(mdp, mixed).expect("mixture of two policies is a policy");
    let mut cost_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let values = opts.cost.clone().unwrap_or_else(|| (0..mdp.num_pairs()).map(|_| cost_rng.gen::<f64>()).collect());
    let cost = match CostFunction::new(values) {
        Ok(c) => c,
        Err(e) => {
            checks.push(PropertyCheck::failed("cost function is valid", e.to_string()));
            return PropertyLedger { samples: opts.samples, checks, warnings };
        }
    };
    let n = opts.samples;
    let stream = |i: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
        r.set_stream(i + 1);
        r
    };

    checks.push(check_occupancy_identities(mdp, &policy, &cost));
    checks.extend(check_visit_means(mdp, &policy, n, &mut stream(0)));
    checks.extend(check_hitting_tail(mdp, &policy, n, &mut stream(1)));
    checks.push(check_stationary_variance(mdp, &policy, &cost, n, &mut stream(2)));

    let h2 = (4.0 * fast.diameter).ceil().max(1.0) as usize;
    match LoopFree::new(mdp, opts.h1.max(1), h2) {
        Ok(lf) => {
            let layered = lf.lift(&policy);
            let setup = LayeredSetup { loop_free: &lf, policy: &layered, fast: &fast.policy };
            checks.push(check_layered_visits(mdp, setup, n, &mut stream(3)));
            checks.push(check_layered_variance(mdp, setup, &cost, n, &mut stream(4)));
            checks.push(check_squared_estimate_bound(mdp, setup, &cost, n, &mut stream(5)));
            checks.extend(check_bandit_estimators(mdp, setup, &cost, n, &mut stream(6)));
        }
        Err(e) => checks.push(PropertyCheck::failed("loop-free reduction", e.to_string())),
    }
    PropertyLedger { samples: n, checks, warnings }
}
