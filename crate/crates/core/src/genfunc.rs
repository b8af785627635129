//! Size-biased expansion of the generating function around `z = 1`.
//!
//! With `psi(z) = sum_k p_k z^k = sum_k (k + 1) a_k (z - 1)^k`, the
//! coefficients are `a_k = (1 / (k + 1)) sum_{l >= k} binom(l, k) p_l`, so
//! `a_0 = 1` and `a_1` is half the mean. Random UC acts on them through
//! the induced recombinator `(R a)_k = (1 / (k + 1)) sum_n a_n a_{k-n}`.

use crate::error::{Result, UcError};
use crate::measure::Distribution;

pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_COEFF_TRUNCATION: usize = 64;

/// Relative size of the last inversion terms above which the alternating
/// series is considered unconverged.
const INVERSION_TAIL_TOL: f64 = 1e-10;

/// Coefficients `a_0..a_K` with the metric parameters of `X_{alpha,delta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    values: Vec<f64>,
    delta: f64,
    gamma: f64,
}

impl CoeffVector {
    /// Wraps raw coefficients. `a_0` must be one; `gamma` must lie in `(0, 1/3)`.
    pub fn new(values: Vec<f64>, delta: f64, gamma: f64) -> Result<Self> {
        if values.first() != Some(&1.0) {
            return Err(UcError::InvalidParameter("coefficient a_0 must equal 1".into()));
        }
        check_params(delta, gamma)?;
        Ok(Self { values, delta, gamma })
    }

    /// Uses `gamma = 1/4` and the smallest admissible `delta >= 1`.
    pub fn with_default_params(values: Vec<f64>) -> Result<Self> {
        let delta = estimate_delta(&values);
        Self::new(values, delta, DEFAULT_GAMMA)
    }

    /// `(1, alpha, alpha^2, ..., alpha^K)`, the coefficient fixed point.
    pub fn geometric(alpha: f64, k_max: usize) -> Self {
        let values: Vec<f64> = (0..=k_max).map(|k| alpha.powi(k as i32)).collect();
        let delta = estimate_delta(&values);
        Self {
            values,
            delta,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn with_params(mut self, delta: f64, gamma: f64) -> Result<Self> {
        check_params(delta, gamma)?;
        self.delta = delta;
        self.gamma = gamma;
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Highest stored index `K`.
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.get(1)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Membership in `X_{alpha,delta}` for the stored range.
    pub fn membership(&self) -> bool {
        self.values[0] == 1.0
            && self
                .values
                .iter()
                .enumerate()
                .skip(2)
                .all(|(k, &a)| a >= 0.0 && a <= self.delta.powi(k as i32))
    }

    /// `d(a, b) = sum_k (gamma / delta)^k |a_k - b_k|` over the stored range.
    pub fn weighted_metric(&self, other: &CoeffVector) -> Result<f64> {
        if self.gamma != other.gamma || self.delta != other.delta {
            return Err(UcError::ParamMismatch);
        }
        let ratio = self.gamma / self.delta;
        let len = self.values.len().max(other.values.len());
        let mut weight = 1.0;
        let mut total = 0.0;
        for k in 0..len {
            total += weight * (self.get(k) - other.get(k)).abs();
            weight *= ratio;
        }
        Ok(total)
    }

    /// Induced random-UC recombinator; exact on the stored range because
    /// `(R a)_k` only involves `a_0..a_k`.
    pub fn induced_recombinator(&self) -> CoeffVector {
        let a = &self.values;
        let values = (0..a.len())
            .map(|k| {
                let conv: f64 = (0..=k).map(|n| a[n] * a[k - n]).sum();
                conv / (k + 1) as f64
            })
            .collect();
        CoeffVector {
            values,
            delta: self.delta,
            gamma: self.gamma,
        }
    }

    /// Takahata's coefficients `b_k = (k + 1) a_k`; `b_1` is the mean.
    pub fn takahata_b(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, a)| (k + 1) as f64 * a)
            .collect()
    }
}

fn check_params(delta: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0 / 3.0) {
        return Err(UcError::InvalidParameter(format!(
            "gamma = {gamma} must lie in (0, 1/3)"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(UcError::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    Ok(())
}

/// `max(1, a_1, max_{k>=2} a_k^{1/k})`, the tightest `delta` for the data.
pub fn estimate_delta(values: &[f64]) -> f64 {
    let alpha = values.get(1).copied().unwrap_or(0.0);
    values
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, &a)| a > 0.0)
        .map(|(k, &a)| a.powf(1.0 / k as f64))
        .fold(1.0f64.max(alpha), f64::max)
}

/// `a_k(p)` for `k <= k_max`, with `a_0` pinned to exactly one.
pub fn coeffs_from_distribution(p: &Distribution, k_max: usize) -> Result<CoeffVector> {
    let p = p.values();
    let mut values = vec![0.0; k_max + 1];
    for (k, slot) in values.iter_mut().enumerate().take(p.len()) {
        // binom(l, k) by ratio updates, l = k, k+1, ...
        let mut binom = 1.0f64;
        let mut sum = 0.0;
        for (l, &pl) in p.iter().enumerate().skip(k) {
            if l > k {
                binom *= l as f64 / (l - k) as f64;
            }
            if !binom.is_finite() {
                return Err(UcError::Overflow { k });
            }
            sum += binom * pl;
        }
        if !sum.is_finite() {
            return Err(UcError::Overflow { k });
        }
        *slot = sum / (k + 1) as f64;
    }
    values[0] = 1.0;
    CoeffVector::with_default_params(values)
}

/// Inverts the coefficient map through the alternating series
/// `p_k = sum_{l >= k} (-1)^{l-k} binom(l, k) (l + 1) a_l`.
///
/// Only converges for fast-decaying coefficients; the last terms of each
/// series must be negligible or the inversion is rejected.
pub fn distribution_from_coeffs(a: &CoeffVector, nmax: usize) -> Result<Distribution> {
    let a = a.values();
    let top = nmax.min(a.len() - 1);
    let mut values = vec![0.0; top + 1];
    for (k, slot) in values.iter_mut().enumerate() {
        let mut binom = 1.0f64;
        let mut sum = 0.0;
        let mut largest = 0.0f64;
        let mut last = [0.0f64; 2];
        for (l, &al) in a.iter().enumerate().skip(k) {
            if l > k {
                binom *= l as f64 / (l - k) as f64;
            }
            let term = binom * (l + 1) as f64 * al;
            if !term.is_finite() {
                return Err(UcError::DivergentInversion { k });
            }
            largest = largest.max(term.abs());
            last = [last[1], term.abs()];
            sum += if (l - k) % 2 == 0 { term } else { -term };
        }
        let scale = largest.max(1.0);
        if last[0] > INVERSION_TAIL_TOL * scale || last[1] > INVERSION_TAIL_TOL * scale {
            return Err(UcError::DivergentInversion { k });
        }
        *slot = if sum < 0.0 && sum > -1e-12 { 0.0 } else { sum };
    }
    let mass: f64 = values.iter().sum();
    let tail = (1.0 - mass).max(0.0);
    Distribution::with_tail(values, tail)
}

/// Coefficients of the random-UC fixed point with `a_1 = alpha`, from the
/// recursion `a_k = (1 / (k - 1)) sum_{n=1}^{k-1} a_n a_{k-n}`.
pub fn fixed_coeffs_recursion(alpha: f64, k_max: usize) -> CoeffVector {
    let mut values = vec![0.0; k_max.max(1) + 1];
    values[0] = 1.0;
    values[1] = alpha;
    for k in 2..=k_max {
        let conv: f64 = (1..k).map(|n| values[n] * values[k - n]).sum();
        values[k] = conv / (k - 1) as f64;
    }
    values.truncate(k_max + 1);
    let delta = estimate_delta(&values);
    CoeffVector {
        values,
        delta,
        gamma: DEFAULT_GAMMA,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixpoint::analytic_random;
    use crate::recomb::apply_random;
    use crate::sample::{random_coeff_values, random_distribution};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `a_k` with exact integer binomials, for small supports.
    fn coeff_oracle(p: &[f64], k: usize) -> f64 {
        fn binom(n: u64, k: u64) -> u64 {
            (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
        }
        let sum: f64 = (k..p.len()).map(|l| binom(l as u64, k as u64) as f64 * p[l]).sum();
        sum / (k + 1) as f64
    }

    #[test]
    fn coefficient_examples() {
        let a = coeffs_from_distribution(&Distribution::point_mass(0), 5).unwrap();
        assert_eq!(a.values(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a = coeffs_from_distribution(&Distribution::point_mass(1), 5).unwrap();
        assert_eq!(a.values(), &[1.0, 0.5, 0.0, 0.0, 0.0, 0.0]);

        let fixed = analytic_random(2.0, 256).unwrap().distribution;
        let a = coeffs_from_distribution(&fixed, 20).unwrap();
        for k in 0..=20 {
            assert_abs_diff_eq!(a.get(k), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn coefficients_match_exact_binomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let p = random_distribution(&mut rng, 25, 0.8);
            let a = coeffs_from_distribution(&p, 25).unwrap();
            assert_abs_diff_eq!(a.alpha(), p.mean() / 2.0, epsilon = 1e-12);
            for k in 1..=25 {
                let expected = coeff_oracle(p.values(), k);
                assert!((a.get(k) - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let mut values = vec![0.0; 1200];
        values[1199] = 1.0;
        let p = Distribution::new(values).unwrap();
        assert!(matches!(
            coeffs_from_distribution(&p, 600),
            Err(UcError::Overflow { .. })
        ));
    }

    #[test]
    fn inversion_examples() {
        let a = CoeffVector::with_default_params(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(distribution_from_coeffs(&a, 10).unwrap(), Distribution::point_mass(0));
        let a = CoeffVector::with_default_params(vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        let p = distribution_from_coeffs(&a, 10).unwrap();
        assert_abs_diff_eq!(p.get(0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1), 1.0, epsilon = 1e-15);

        // a_k = 2^{-k} belongs to the random-UC fixed point with mean 1
        let halves = CoeffVector::geometric(0.5, 256);
        let p = distribution_from_coeffs(&halves, 40).unwrap();
        let expected = analytic_random(1.0, 40).unwrap().distribution;
        for k in 0..=40 {
            assert_abs_diff_eq!(p.get(k), expected.get(k), epsilon = 1e-8);
        }
    }

    #[test]
    fn inversion_rejects_slow_decay() {
        let ones = CoeffVector::geometric(1.0, 60);
        assert!(matches!(
            distribution_from_coeffs(&ones, 30),
            Err(UcError::DivergentInversion { .. })
        ));
    }

    #[test]
    fn roundtrip_on_small_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let p = random_distribution(&mut rng, 20, 0.45);
            let a = coeffs_from_distribution(&p, 20).unwrap();
            let back = distribution_from_coeffs(&a, 20).unwrap();
            for k in 0..=20 {
                assert_abs_diff_eq!(back.get(k), p.get(k), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn induced_recombinator_examples() {
        let geo = CoeffVector::geometric(0.7, 12);
        let out = geo.induced_recombinator();
        for k in 0..=12 {
            assert_abs_diff_eq!(out.get(k), geo.get(k), epsilon = 1e-15);
        }
        let unit = CoeffVector::with_default_params(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(unit.induced_recombinator().values(), unit.values());
        let a = CoeffVector::with_default_params(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let out = a.induced_recombinator();
        assert_abs_diff_eq!(out.get(2), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(out.get(3), 0.0);
        assert_eq!(&out.values()[..2], &[1.0, 1.0]);
    }

    #[test]
    fn metric_examples() {
        let delta = 1.5;
        let a = CoeffVector::new(vec![1.0, 0.4, 0.2, 0.1], delta, 0.25).unwrap();
        assert_eq!(a.weighted_metric(&a).unwrap(), 0.0);
        let mut shifted = a.values().to_vec();
        shifted[2] += delta * delta;
        let b = CoeffVector::new(shifted, delta, 0.25).unwrap();
        assert_abs_diff_eq!(a.weighted_metric(&b).unwrap(), 0.0625, epsilon = 1e-15);
        let c = a.clone().with_params(2.0, 0.25).unwrap();
        assert!(matches!(a.weighted_metric(&c), Err(UcError::ParamMismatch)));
    }

    #[test]
    fn parameter_validation() {
        assert!(CoeffVector::new(vec![1.0, 0.5], 1.0, 1.0 / 3.0).is_err());
        assert!(CoeffVector::new(vec![1.0, 0.5], 0.0, 0.2).is_err());
        assert!(CoeffVector::new(vec![0.9, 0.5], 1.0, 0.2).is_err());
    }

    #[test]
    fn membership_examples() {
        let delta = 1.2;
        let inside = CoeffVector::new(vec![1.0, 0.5, 0.0, 0.0], delta, 0.25).unwrap();
        assert!(inside.membership());
        let outside = CoeffVector::new(vec![1.0, 0.5, delta * delta * 1.01], delta, 0.25).unwrap();
        assert!(!outside.membership());
        let fixed = analytic_random(2.0, 256).unwrap().distribution;
        let a = coeffs_from_distribution(&fixed, 40)
            .unwrap()
            .with_params(1.05, 0.25)
            .unwrap();
        assert!(a.membership());
    }

    #[test]
    fn recursion_examples() {
        assert_eq!(fixed_coeffs_recursion(1.0, 5).values(), &[1.0; 6]);
        assert_eq!(fixed_coeffs_recursion(0.0, 4).values(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let half = fixed_coeffs_recursion(0.5, 4);
        for (k, v) in half.values().iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5f64.powi(k as i32), epsilon = 1e-15);
        }
        for &alpha in &[0.3, 1.7] {
            let rec = fixed_coeffs_recursion(alpha, 30);
            for k in 0..=30 {
                let exact = alpha.powi(k as i32);
                assert!((rec.get(k) - exact).abs() <= 1e-12 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn commuting_diagram() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let p = random_distribution(&mut rng, 20, 0.6);
            let k_max = 2 * p.max_support() + 1;
            let lhs = coeffs_from_distribution(&apply_random(&p).unwrap(), k_max).unwrap();
            let rhs = coeffs_from_distribution(&p, k_max).unwrap().induced_recombinator();
            let lhs = lhs.with_params(rhs.delta(), rhs.gamma()).unwrap();
            assert!(lhs.weighted_metric(&rhs).unwrap() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn induced_recombinator_contracts(seed in any::<u64>(), alpha in 0.05f64..2.0, slack in 1.0f64..1.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let delta = alpha.max(1.0) * slack;
            let a = CoeffVector::new(random_coeff_values(&mut rng, 40, alpha, delta), delta, DEFAULT_GAMMA).unwrap();
            let b = CoeffVector::new(random_coeff_values(&mut rng, 40, alpha, delta), delta, DEFAULT_GAMMA).unwrap();
            let before = a.weighted_metric(&b).unwrap();
            let after = a.induced_recombinator().weighted_metric(&b.induced_recombinator()).unwrap();
            prop_assert!(after <= 8.0 / 9.0 * before + 1e-12);
            prop_assert!(a.induced_recombinator().membership());
        }

        #[test]
        fn coefficient_map_is_linear(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_distribution(&mut rng, 20, 0.7);
            let q = random_distribution(&mut rng, 20, 0.7);
            let mixed = coeffs_from_distribution(&Distribution::mix(lambda, &p, &q).unwrap(), 20).unwrap();
            let ap = coeffs_from_distribution(&p, 20).unwrap();
            let aq = coeffs_from_distribution(&q, 20).unwrap();
            for k in 0..=20 {
                let expected = lambda * ap.get(k) + (1.0 - lambda) * aq.get(k);
                prop_assert!((mixed.get(k) - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }
    }
}
