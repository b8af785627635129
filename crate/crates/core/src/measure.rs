//! Probability distributions on copy numbers, truncated to `0..=N`.

use serde::Serialize;

use crate::error::{Result, UcError};

/// Default truncation bound `N`.
pub const DEFAULT_TRUNCATION: usize = 256;
/// Default bound on mass lost through truncation before a state is rejected.
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-8;
/// Normalization tolerance for user-supplied distributions.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Entries above `-NEGATIVE_ROUNDOFF` are treated as roundoff and clipped.
const NEGATIVE_ROUNDOFF: f64 = 1e-15;

/// Probability vector `p_0..p_N` plus the mass discarded by truncation.
///
/// Trailing zeros are trimmed, so `len()` is one past the largest copy
/// number in the support. Distributions are immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    values: Vec<f64>,
    tail_mass: f64,
}

impl Distribution {
    /// Validates a probability vector: nonnegative, summing to one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tail(values, 0.0)
    }

    /// Like [`Distribution::new`] but with `tail_mass` already lost to truncation.
    pub fn with_tail(mut values: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(UcError::InvalidParameter("empty distribution".into()));
        }
        if !(tail_mass >= 0.0) {
            return Err(UcError::InvalidParameter(format!("tail mass {tail_mass} is negative")));
        }
        for (index, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -NEGATIVE_ROUNDOFF {
                return Err(UcError::NegativeMass { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum + tail_mass - 1.0).abs() > INPUT_TOLERANCE {
            return Err(UcError::NotNormalized { sum: sum + tail_mass });
        }
        Ok(Self::from_parts(values, tail_mass))
    }

    /// Internal constructor for vectors produced by the recombinators.
    pub(crate) fn from_parts(mut values: Vec<f64>, tail_mass: f64) -> Self {
        while values.len() > 1 && values[values.len() - 1] == 0.0 {
            values.pop();
        }
        if values.is_empty() {
            values.push(0.0);
        }
        Self { values, tail_mass }
    }

    pub fn point_mass(k: usize) -> Self {
        let mut values = vec![0.0; k + 1];
        values[k] = 1.0;
        Self { values, tail_mass: 0.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `p_k`, zero beyond the stored range.
    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Largest copy number with positive mass.
    pub fn max_support(&self) -> usize {
        self.values.iter().rposition(|&v| v > 0.0).unwrap_or(0)
    }

    /// Smallest copy number with positive mass.
    pub fn min_support(&self) -> usize {
        self.values.iter().position(|&v| v > 0.0).unwrap_or(0)
    }

    /// Mass held in the stored entries.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `M_s(p) = sum_k |k - m|^s p_k`.
    pub fn centered_moment(&self, s: f64, m: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(k, &p)| {
                let dev = (k as f64 - m).abs();
                let pow = if s == 1.0 {
                    dev
                } else if s == 2.0 {
                    dev * dev
                } else {
                    dev.powf(s)
                };
                pow * p
            })
            .sum()
    }

    pub fn moments(&self, r: f64) -> MomentReport {
        let mean = self.mean();
        MomentReport {
            mean,
            m1: self.centered_moment(1.0, mean),
            mr: self.centered_moment(r, mean),
            r,
        }
    }

    /// Convex combination `lambda * a + (1 - lambda) * b`.
    pub fn mix(lambda: f64, a: &Distribution, b: &Distribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(UcError::InvalidParameter(format!(
                "mixing weight {lambda} outside [0, 1]"
            )));
        }
        let len = a.len().max(b.len());
        let values = (0..len)
            .map(|k| lambda * a.get(k) + (1.0 - lambda) * b.get(k))
            .collect();
        let tail = lambda * a.tail_mass + (1.0 - lambda) * b.tail_mass;
        Ok(Self::from_parts(values, tail))
    }
}

/// Mean and centered moments `M_1`, `M_r` of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    pub m1: f64,
    pub mr: f64,
    pub r: f64,
}

/// L1 distance `sum_k |p_k - q_k|`; the shorter vector is zero-padded.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> f64 {
    l1_distance(p.values(), q.values())
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum()
}
