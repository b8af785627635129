//! Fixed points: closed forms at `q = 0`, `q = 1` and for Takahata's model,
//! plain fixed-point iteration in between, plus detailed-balance and
//! `q`-monotonicity diagnostics.

use crate::error::{Result, UcError};
use crate::genfunc::coeffs_from_distribution;
use crate::kernel::KernelQ;
use crate::measure::{tv_distance, Distribution};
use crate::recomb::{Model, RecombinatorSpec};

/// Largest truncation tail accepted for the closed-form fixed points.
pub const ANALYTIC_TAIL_LIMIT: f64 = 1e-12;
/// Default `i + j = k + l` bound for the reversibility check.
pub const DEFAULT_REVERSIBILITY_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Iterative { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub distribution: Distribution,
    pub model: Model,
    pub mean_target: f64,
    /// `|R(p) - p|_1` on the truncation window.
    pub residual: f64,
    pub provenance: Provenance,
}

fn residual_of(model: Model, p: &Distribution, nmax: usize) -> Result<f64> {
    let spec = model
        .recombinator()?
        .with_truncation(nmax)
        .with_leak_threshold(f64::INFINITY);
    Ok(tv_distance(&spec.apply(p)?, p))
}

fn analytic(model: Model, mean: f64, distribution: Distribution, nmax: usize) -> Result<FixedPointResult> {
    let residual = residual_of(model, &distribution, nmax)?;
    Ok(FixedPointResult {
        distribution,
        model,
        mean_target: mean,
        residual,
        provenance: Provenance::Analytic,
    })
}

fn check_mean(m: f64, nmax: usize) -> Result<()> {
    if !(m >= 0.0 && m <= nmax as f64) {
        return Err(UcError::MeanOutOfRange { m, nmax });
    }
    Ok(())
}

/// Internal UC fixed point: all mass on the two integers around `m`.
pub fn analytic_internal(m: f64, nmax: usize) -> Result<FixedPointResult> {
    check_mean(m, nmax)?;
    let lower = m.floor();
    let mut values = vec![0.0; lower as usize + 2];
    values[lower as usize] = lower + 1.0 - m;
    values[lower as usize + 1] = m - lower;
    let p = Distribution::from_parts(values, 0.0);
    analytic(Model::Penalty(0.0), m, p, nmax)
}

/// Random UC fixed point `p_k = (2/(m+2))^2 (k+1) (m/(m+2))^k`.
pub fn analytic_random(m: f64, nmax: usize) -> Result<FixedPointResult> {
    check_mean(m, nmax)?;
    let x = m / (m + 2.0);
    let n = nmax as f64;
    let tail = x.powi(nmax as i32 + 1) * ((n + 2.0) - (n + 1.0) * x);
    if tail >= ANALYTIC_TAIL_LIMIT {
        return Err(UcError::TruncationTooSmall { nmax, tail });
    }
    let mut values = Vec::with_capacity(nmax + 1);
    let mut current = (1.0 - x) * (1.0 - x);
    values.push(current);
    for k in 1..=nmax {
        current *= x * (k + 1) as f64 / k as f64;
        values.push(current);
    }
    let p = Distribution::from_parts(values, tail);
    analytic(Model::Penalty(1.0), m, p, nmax)
}

/// Takahata fixed point, geometric with mean `m`.
pub fn analytic_takahata(m: f64, nmax: usize) -> Result<FixedPointResult> {
    check_mean(m, nmax)?;
    let x = m / (m + 1.0);
    let tail = x.powi(nmax as i32 + 1);
    if tail >= ANALYTIC_TAIL_LIMIT {
        return Err(UcError::TruncationTooSmall { nmax, tail });
    }
    let mut values = Vec::with_capacity(nmax + 1);
    let mut current = 1.0 - x;
    values.push(current);
    for _ in 1..=nmax {
        current *= x;
        values.push(current);
    }
    let p = Distribution::from_parts(values, tail);
    analytic(Model::Takahata, m, p, nmax)
}

/// Closed-form fixed point for the models that have one.
pub fn analytic_fixed_point(model: Model, m: f64, nmax: usize) -> Option<Result<FixedPointResult>> {
    match model {
        Model::Penalty(0.0) => Some(analytic_internal(m, nmax)),
        Model::Penalty(1.0) => Some(analytic_random(m, nmax)),
        Model::Takahata => Some(analytic_takahata(m, nmax)),
        Model::Penalty(_) => None,
    }
}

/// Iterates `R_q` from the random-UC fixed point with mean `m` until
/// successive iterates are closer than `tol`.
///
/// The returned distribution is the last iterate `p` whose successor
/// satisfied the tolerance, so `residual = |R(p) - p|_1 < tol`.
pub fn solve_numeric(q: f64, m: f64, nmax: usize, tol: f64, max_iter: usize) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(UcError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let model = Model::Penalty(q);
    let spec: RecombinatorSpec = model.recombinator()?.with_truncation(nmax);
    let start = analytic_random(m, nmax)?.distribution;
    iterate_to_fixed_point(&spec, model, start, m, tol, max_iter)
}

pub(crate) fn iterate_to_fixed_point(
    spec: &RecombinatorSpec,
    model: Model,
    start: Distribution,
    mean_target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    let mut current = start;
    let mut best: Option<(f64, Distribution)> = None;
    for iteration in 1..=max_iter {
        let next = spec.apply(&current)?;
        let residual = tv_distance(&next, &current);
        if residual < tol {
            return Ok(FixedPointResult {
                distribution: current,
                model,
                mean_target,
                residual,
                provenance: Provenance::Iterative { iterations: iteration },
            });
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, current));
        }
        current = next;
    }
    let (residual, distribution) = best.unwrap_or((f64::INFINITY, current));
    Err(UcError::NotConverged {
        iterations: max_iter,
        best: Box::new(FixedPointResult {
            distribution,
            model,
            mean_target,
            residual,
            provenance: Provenance::Iterative { iterations: max_iter },
        }),
    })
}

/// Largest detailed-balance violation
/// `|T_{ij,kl} p_k p_l - T_{kl,ij} p_i p_j|` over `i + j = k + l <= window`.
pub fn reversibility_residual(p: &Distribution, kernel: &KernelQ, window: usize) -> f64 {
    let mut worst = 0.0f64;
    for n in 0..=window {
        for k in 0..=n {
            let l = n - k;
            let forward_mass = p.get(k) * p.get(l);
            for i in 0..=n {
                let j = n - i;
                let forward = kernel.transition(i, j, k, l) * forward_mass;
                let backward = kernel.transition(k, l, i, j) * p.get(i) * p.get(j);
                worst = worst.max((forward - backward).abs());
            }
        }
    }
    worst
}

/// True iff `a(R_q p) <= a(R_q' p)` coefficientwise (up to `1e-10`) for
/// `j <= k_max`, with both recombinators run through the general kernel.
pub fn monotonicity_check(p: &Distribution, q: f64, qprime: f64, k_max: usize) -> Result<bool> {
    if q > qprime {
        return Err(UcError::InvalidParameter(format!("need q <= q', got {q} > {qprime}")));
    }
    let nmax = 2 * p.len();
    let lower = RecombinatorSpec::general(q)?.with_truncation(nmax).apply(p)?;
    let upper = RecombinatorSpec::general(qprime)?.with_truncation(nmax).apply(p)?;
    let a = coeffs_from_distribution(&lower, k_max)?;
    let b = coeffs_from_distribution(&upper, k_max)?;
    Ok((0..=k_max).all(|j| a.get(j) <= b.get(j) + 1e-10))
}
