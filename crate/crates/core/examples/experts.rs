//! The multi-scale experts meta-learner on a synthetic loss stream, compared
//! with its regret guarantee against every expert.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssp_lab::learners::MultiScaleExperts;

fn main() {
    let episodes = 10_000;
    let mut experts = MultiScaleExperts::new(100.0, episodes, 32.0);
    let scales = experts.scales().to_vec();
    println!("{} experts, scales {scales:?}", experts.len());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fractions: Vec<f64> = scales.iter().map(|_| rng.gen_range(0.1..0.9)).collect();
    let mut meta = 0.0;
    let mut totals = vec![0.0; scales.len()];
    for _ in 0..episodes {
        let losses: Vec<f64> = scales.iter().zip(&fractions).map(|(b, f)| b * (f + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)).collect();
        meta += experts.probabilities().iter().zip(&losses).map(|(p, l)| p * l).sum::<f64>();
        totals.iter_mut().zip(&losses).for_each(|(t, l)| *t += l);
        experts.update(&losses);
    }
    for (j, total) in totals.iter().enumerate() {
        println!("expert {j}: regret {:>12.2}  bound {:>12.2}", meta - total, experts.regret_bound(j, *total));
    }
    println!("final distribution {:.3?}", experts.probabilities());
}
