//! Seeded random inputs for property checks and the verification suite.
//!
//! Distributions have finite support and a geometric envelope, so every
//! generating-function precondition holds by construction.

use rand::Rng;

use crate::measure::Distribution;

/// Random distribution with largest copy number at most `max_copy` and
/// envelope `decay^k`.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, max_copy: usize, decay: f64) -> Distribution {
    let top = rng.gen_range(0..=max_copy);
    let raw: Vec<f64> = (0..=top)
        .map(|k| rng.gen_range(0.05..1.0) * decay.powi(k as i32))
        .collect();
    normalized(raw)
}

/// Random distribution with mean exactly `mean` (up to rounding), obtained
/// by mixing a random draw with a point mass at `0` or at `max_copy`.
///
/// Requires `mean < max_copy`.
pub fn random_with_mean<R: Rng + ?Sized>(rng: &mut R, max_copy: usize, decay: f64, mean: f64) -> Distribution {
    assert!(mean < max_copy as f64, "mean {mean} needs max_copy > mean");
    let base = random_distribution(rng, max_copy, decay);
    let mu = base.mean();
    let (anchor, lambda) = if mu > mean {
        (0usize, mean / mu)
    } else {
        let top = max_copy as f64;
        (max_copy, (top - mean) / (top - mu))
    };
    let mut values = vec![0.0; max_copy + 1];
    for (k, v) in base.values().iter().enumerate() {
        values[k] = lambda * v;
    }
    values[anchor] += 1.0 - lambda;
    normalized(values)
}

fn normalized(raw: Vec<f64>) -> Distribution {
    let sum: f64 = raw.iter().sum();
    Distribution::new(raw.into_iter().map(|v| v / sum).collect()).expect("positive weights normalize")
}

/// Random coefficient vector in `X_{alpha, delta}` with `K + 1` entries.
pub fn random_coeff_values<R: Rng + ?Sized>(rng: &mut R, k_max: usize, alpha: f64, delta: f64) -> Vec<f64> {
    (0..=k_max)
        .map(|k| match k {
            0 => 1.0,
            1 => alpha,
            _ => rng.gen_range(0.0..=1.0) * delta.powi(k as i32),
        })
        .collect()
}
