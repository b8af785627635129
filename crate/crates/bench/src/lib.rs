//! Fixed inputs for the benchmarks.

use uc_core::{analytic_random, Distribution};

/// Random-UC fixed point with mean 2 on `0..=nmax`: full support, smooth
/// decay, the typical state late in an evolution.
pub fn smooth_state(nmax: usize) -> Distribution {
    let p = analytic_random(2.0, 256)
        .expect("N = 256 holds the m = 2 fixed point")
        .distribution;
    let mut values: Vec<f64> = p.values().iter().take(nmax + 1).copied().collect();
    let mass: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= mass);
    Distribution::new(values).expect("renormalized")
}

/// Uniform distribution on `0..=nmax`.
pub fn flat_state(nmax: usize) -> Distribution {
    Distribution::new(vec![1.0 / (nmax + 1) as f64; nmax + 1]).expect("uniform")
}
