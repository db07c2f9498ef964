//! Exponential weights with a different learning rate per coordinate.

/// Minimises `⟨ℓ + a, p⟩ + Σ_j (1/η_j) KL(p_j ‖ p̄_j)` over the simplex.
///
/// The solution is `p_j = p̄_j exp(−η_j (ℓ_j + a_j + z))` with the scalar `z`
/// chosen by bisection so that the weights sum to one (to within `1e-12`).
pub fn multi_rate_exponential_weights(prev: &[f64], rates: &[f64], loss: &[f64], correction: &[f64]) -> Vec<f64> {
    assert!(!prev.is_empty() && prev.len() == rates.len() && rates.len() == loss.len() && loss.len() == correction.len());
    let shifted: Vec<f64> = loss.iter().zip(correction).map(|(l, a)| l + a).collect();
    // Work in logs so that huge learning rates cannot underflow everything.
    let log_base: Vec<f64> = prev.iter().zip(rates).zip(&shifted).map(|((p, e), s)| p.ln() - e * s).collect();
    let mass = |z: f64| -> f64 { log_base.iter().zip(rates).map(|(b, e)| (b - e * z).exp()).sum() };
    // mass is decreasing in z; bracket the root.
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mass(lo) < 1.0 {
        lo *= 2.0;
    }
    while mass(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let mut p: Vec<f64> = log_base.iter().zip(rates).map(|(b, e)| (b - e * z).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_rates_reduce_to_hedge() {
        let prev = [0.5, 0.25, 0.25];
        let p = multi_rate_exponential_weights(&prev, &[0.7; 3], &[1.0, 0.0, 2.0], &[0.0; 3]);
        let w: Vec<f64> = prev.iter().zip([1.0, 0.0, 2.0]).map(|(p, l)| p * (-0.7 * l as f64).exp()).collect();
        let s: f64 = w.iter().sum();
        for (a, b) in p.iter().zip(w) {
            assert!((a - b / s).abs() < 1e-12);
        }
    }

    #[test]
    fn stationarity_holds_with_mixed_rates() {
        let prev = [0.1, 0.6, 0.3];
        let rates = [2.0, 0.1, 0.5];
        let loss = [0.3, 0.9, 0.2];
        let corr = [0.05, 0.0, 0.4];
        let p = multi_rate_exponential_weights(&prev, &rates, &loss, &corr);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // ℓ_j + a_j + (1/η_j) ln(p_j/p̄_j) is the same for every j.
        let g: Vec<f64> = (0..3).map(|j| loss[j] + corr[j] + (p[j] / prev[j]).ln() / rates[j]).collect();
        assert!((g[0] - g[1]).abs() < 1e-9 && (g[1] - g[2]).abs() < 1e-9);
    }
}
