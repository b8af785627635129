//! Transition probabilities of unequal crossover.
//!
//! A pair of sequences with copy numbers `(k, l)` aligns, crosses over and
//! separates into a pair `(i, j)` with `i + j = k + l`. Perfect alignments
//! are equally likely; an alignment whose shorter sequence overhangs the
//! longer one by `d` units is penalized by `q^d`.

use crate::error::{Result, UcError};

/// Copy numbers up to this bound get their normalization constant cached
/// when a kernel is built with [`KernelQ::new`].
pub const DEFAULT_CACHE_BOUND: usize = 64;

/// Unnormalized weight of the outcome `(i, j)` from the pair `(k, l)`.
///
/// Zero unless `i + j == k + l`. Uses `0^0 = 1`.
pub fn weight(q: f64, i: usize, j: usize, k: usize, l: usize) -> f64 {
    if i + j != k + l {
        return 0.0;
    }
    let shortest = k.min(l).min(i).min(j);
    let overhang = k.min(l).saturating_sub(i.min(j));
    (1 + shortest) as f64 * penalty(q, overhang)
}

/// `q^d` with the `0^0 = 1` convention handled by branch.
#[inline]
fn penalty(q: f64, overhang: usize) -> f64 {
    if overhang == 0 {
        1.0
    } else if q == 0.0 {
        0.0
    } else {
        q.powi(overhang as i32)
    }
}

/// Outcome row sum of unnormalized weights, i.e. `1 / C_{kl}`.
fn row_weight_sum(q: f64, k: usize, l: usize) -> f64 {
    let (k, l) = (k.min(l), k.max(l));
    let n = k + l;
    (0..=n).map(|i| weight(q, i, n - i, k, l)).sum()
}

/// UC kernel with penalty parameter `q` and cached normalization constants.
///
/// Constants are filled eagerly at construction, so a kernel is immutable
/// afterwards and can be shared freely between threads.
#[derive(Debug, Clone)]
pub struct KernelQ {
    q: f64,
    bound: usize,
    cache: Vec<f64>,
}

impl KernelQ {
    pub fn new(q: f64) -> Result<Self> {
        Self::with_cache_bound(q, DEFAULT_CACHE_BOUND)
    }

    /// Kernel whose constants `C_{kl}` for `k, l <= bound` are precomputed.
    pub fn with_cache_bound(q: f64, bound: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(UcError::InvalidParameter(format!("penalty q = {q} must lie in [0, 1]")));
        }
        let side = bound + 1;
        let mut cache = vec![0.0; side * side];
        for k in 0..side {
            for l in k..side {
                let c = 1.0 / row_weight_sum(q, k, l);
                cache[k * side + l] = c;
                cache[l * side + k] = c;
            }
        }
        Ok(Self { q, bound, cache })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Normalization constant `C_{kl}`, by direct summation of the row.
    pub fn c_coefficient(&self, k: usize, l: usize) -> f64 {
        if k <= self.bound && l <= self.bound {
            self.cache[k * (self.bound + 1) + l]
        } else {
            1.0 / row_weight_sum(self.q, k, l)
        }
    }

    /// `T_{ij,kl}`: probability that the pair `(k, l)` becomes `(i, j)`.
    pub fn transition(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        if i + j != k + l {
            return 0.0;
        }
        self.c_coefficient(k, l) * weight(self.q, i, j, k, l)
    }

    /// Writes `T_{i(k+l-i),kl}` for `i = 0..=k+l` into `row`.
    pub fn fill_row(&self, k: usize, l: usize, row: &mut Vec<f64>) {
        let n = k + l;
        row.clear();
        // weights are symmetric under i <-> n - i
        row.extend((0..=n / 2).map(|i| weight(self.q, i, n - i, k, l)));
        for i in n / 2 + 1..=n {
            row.push(row[n - i]);
        }
        let c = if k <= self.bound && l <= self.bound {
            self.cache[k * (self.bound + 1) + l]
        } else {
            1.0 / row.iter().sum::<f64>()
        };
        for t in row.iter_mut() {
            *t *= c;
        }
    }

    pub fn row(&self, k: usize, l: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(k + l + 1);
        self.fill_row(k, l, &mut row);
        row
    }

    pub fn validate_row(&self, k: usize, l: usize) -> RowReport {
        validate_probabilities(&self.row(k, l), k + l)
    }
}

/// Takahata's variant: every split of `k + l` units is equally likely.
pub fn takahata_transition(i: usize, j: usize, k: usize, l: usize) -> f64 {
    if i + j == k + l {
        1.0 / (k + l + 1) as f64
    } else {
        0.0
    }
}

/// Deviations of one kernel row from normalization and mean conservation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowReport {
    pub sum_deviation: f64,
    pub mean_deviation: f64,
}

impl RowReport {
    pub fn within(&self, tol: f64) -> bool {
        self.sum_deviation <= tol && self.mean_deviation <= tol
    }
}

/// Checks a row indexed by the first offspring copy number `i`, for pairs
/// with `total = k + l` units.
pub fn validate_probabilities(row: &[f64], total: usize) -> RowReport {
    let sum: f64 = row.iter().sum();
    let first_moment: f64 = row.iter().enumerate().map(|(i, t)| i as f64 * t).sum();
    RowReport {
        sum_deviation: (sum - 1.0).abs(),
        mean_deviation: (first_moment - total as f64 / 2.0).abs(),
    }
}
