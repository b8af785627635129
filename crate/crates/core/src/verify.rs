//! Seeded invariant suite behind `uc verify`.
//!
//! Each check draws from its own generator, seeded from the suite seed and
//! the check name, so results do not depend on execution order. Checks run
//! concurrently; the report is sorted by name.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve_continuous, evolve_discrete, rhs, EvolveConfig};
use crate::error::Result;
use crate::fixpoint::{
    analytic_internal, analytic_random, analytic_takahata, monotonicity_check, reversibility_residual, solve_numeric,
};
use crate::genfunc::{
    coeffs_from_distribution, distribution_from_coeffs, fixed_coeffs_recursion, CoeffVector, DEFAULT_GAMMA,
};
use crate::kernel::{validate_probabilities, weight, KernelQ};
use crate::measure::{tv_distance, Distribution};
use crate::recomb::{apply_internal, apply_random, Model, RecombinatorSpec};
use crate::sample::{random_coeff_values, random_distribution, random_with_mean};

pub const DEFAULT_SEED: u64 = 42;

/// Deliberate defects for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Kernel rows use raw weights without the normalization constant.
    SkipKernelNormalization,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl VerifyConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Ctx {
    seed: u64,
    fault: Option<Fault>,
}

impl Ctx {
    fn rng(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a of the check name
        let hash = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
        });
        ChaCha8Rng::seed_from_u64(self.seed ^ hash)
    }

    fn kernel_row(&self, kernel: &KernelQ, k: usize, l: usize) -> Vec<f64> {
        match self.fault {
            Some(Fault::SkipKernelNormalization) => {
                let n = k + l;
                (0..=n).map(|i| weight(kernel.q(), i, n - i, k, l)).collect()
            }
            None => kernel.row(k, l),
        }
    }
}

type Check = fn(&Ctx, &str) -> Result<(f64, f64, bool)>;

fn at_most(measured: f64, tolerance: f64) -> Result<(f64, f64, bool)> {
    Ok((measured, tolerance, measured <= tolerance))
}

fn at_least(measured: f64, tolerance: f64) -> Result<(f64, f64, bool)> {
    Ok((measured, tolerance, measured >= tolerance))
}

const Q_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const CHECKS: &[(&str, Check)] = &[
    ("kernel.row_sums", |ctx, _| {
        let mut worst = 0.0f64;
        for q in Q_GRID {
            let kernel = KernelQ::new(q)?;
            for k in 0..=40 {
                for l in 0..=40 {
                    let report = validate_probabilities(&ctx.kernel_row(&kernel, k, l), k + l);
                    worst = worst.max(report.sum_deviation);
                }
            }
        }
        at_most(worst, 1e-12)
    }),
    ("kernel.row_means", |ctx, _| {
        let mut worst = 0.0f64;
        for q in Q_GRID {
            let kernel = KernelQ::new(q)?;
            for k in 0..=40 {
                for l in 0..=40 {
                    let report = validate_probabilities(&ctx.kernel_row(&kernel, k, l), k + l);
                    worst = worst.max(report.mean_deviation);
                }
            }
        }
        at_most(worst, 1e-12)
    }),
    ("kernel.symmetry", |_, _| {
        let mut mismatches = 0usize;
        for q in Q_GRID {
            let kernel = KernelQ::new(q)?;
            for k in 0..=15 {
                for l in 0..=15 {
                    for i in 0..=(k + l) {
                        let j = k + l - i;
                        let t = kernel.transition(i, j, k, l).to_bits();
                        mismatches += (t != kernel.transition(j, i, k, l).to_bits()) as usize;
                        mismatches += (t != kernel.transition(i, j, l, k).to_bits()) as usize;
                    }
                }
            }
        }
        at_most(mismatches as f64, 0.0)
    }),
    ("kernel.internal_specialization", |ctx, _| {
        let kernel = KernelQ::new(0.0)?;
        let mut worst = 0.0f64;
        for k in 0..=25 {
            for l in 0..=25 {
                let (lo, hi) = (k.min(l), k.max(l));
                for (i, t) in ctx.kernel_row(&kernel, k, l).iter().enumerate() {
                    let expected = if (lo..=hi).contains(&i) {
                        1.0 / (1 + hi - lo) as f64
                    } else {
                        0.0
                    };
                    worst = worst.max((t - expected).abs());
                }
            }
        }
        at_most(worst, 1e-14)
    }),
    ("kernel.random_specialization", |ctx, _| {
        let kernel = KernelQ::new(1.0)?;
        let mut worst = 0.0f64;
        for k in 0..=25 {
            for l in 0..=25 {
                let n = k + l;
                for (i, t) in ctx.kernel_row(&kernel, k, l).iter().enumerate() {
                    let expected = (1 + k.min(l).min(i).min(n - i)) as f64 / ((k + 1) * (l + 1)) as f64;
                    worst = worst.max((t - expected).abs());
                }
            }
        }
        at_most(worst, 1e-14)
    }),
    ("kernel.combinatorial_identity", |_, _| {
        let mut failures = 0usize;
        for n in 0..=50usize {
            for i in 0..=n {
                let total: usize = (0..=n).map(|j| 1 + i.min(j).min(n - i).min(n - j)).sum();
                failures += (total != (i + 1) * (n - i + 1)) as usize;
            }
        }
        at_most(failures as f64, 0.0)
    }),
    ("measure.tv_triangle", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..200 {
            let p = random_distribution(&mut rng, 30, 0.8);
            let q = random_distribution(&mut rng, 30, 0.8);
            let r = random_distribution(&mut rng, 30, 0.8);
            worst = worst.max(tv_distance(&p, &r) - tv_distance(&p, &q) - tv_distance(&q, &r));
            worst = worst.max((tv_distance(&p, &q) - tv_distance(&q, &p)).abs());
        }
        at_most(worst, 1e-15)
    }),
    ("measure.mean_linearity", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for i in 0..100 {
            let p = random_distribution(&mut rng, 30, 0.8);
            let q = random_distribution(&mut rng, 30, 0.8);
            let lambda = i as f64 / 99.0;
            let mixed = Distribution::mix(lambda, &p, &q)?;
            worst = worst.max((mixed.mean() - lambda * p.mean() - (1.0 - lambda) * q.mean()).abs());
        }
        at_most(worst, 1e-12)
    }),
    ("recomb.mass_conservation", |ctx, name| {
        let mut rng = ctx.rng(name);
        let specs = [
            RecombinatorSpec::general(0.4)?,
            RecombinatorSpec::for_q(0.0)?,
            RecombinatorSpec::for_q(1.0)?,
            RecombinatorSpec::takahata(),
        ];
        let mut worst = 0.0f64;
        for _ in 0..25 {
            let p = random_distribution(&mut rng, 40, 0.7);
            for spec in &specs {
                let out = spec.apply(&p)?;
                worst = worst.max((out.mass() + out.tail_mass() - p.mass() - p.tail_mass()).abs());
            }
        }
        at_most(worst, 1e-12)
    }),
    ("recomb.mean_conservation", |ctx, name| {
        let mut rng = ctx.rng(name);
        let specs = [
            RecombinatorSpec::general(0.6)?,
            RecombinatorSpec::for_q(0.0)?,
            RecombinatorSpec::for_q(1.0)?,
            RecombinatorSpec::takahata(),
        ];
        let mut worst = 0.0f64;
        for _ in 0..25 {
            let p = random_distribution(&mut rng, 40, 0.7);
            for spec in &specs {
                let out = spec.apply(&p)?;
                let allowance = spec.truncation as f64 * out.tail_mass();
                worst = worst.max((out.mean() - p.mean()).abs() - allowance);
            }
        }
        at_most(worst, 1e-10)
    }),
    ("recomb.internal_equivalence", |ctx, name| {
        let mut rng = ctx.rng(name);
        let general = RecombinatorSpec::general(0.0)?;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = random_distribution(&mut rng, 64, 0.9);
            worst = worst.max(tv_distance(&general.apply(&p)?, &apply_internal(&p)));
        }
        at_most(worst, 1e-12)
    }),
    ("recomb.random_equivalence", |ctx, name| {
        let mut rng = ctx.rng(name);
        let general = RecombinatorSpec::general(1.0)?;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let p = random_distribution(&mut rng, 64, 0.9);
            worst = worst.max(tv_distance(&general.apply(&p)?, &apply_random(&p)?));
        }
        at_most(worst, 1e-12)
    }),
    ("recomb.lipschitz", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for q in [0.0, 0.5, 1.0] {
            let spec = RecombinatorSpec::for_q(q)?;
            for _ in 0..50 {
                let p = random_distribution(&mut rng, 30, 0.8);
                let r = random_distribution(&mut rng, 30, 0.8);
                let gap = tv_distance(&p, &r);
                if gap > 0.0 {
                    worst = worst.max(tv_distance(&spec.apply(&p)?, &spec.apply(&r)?) / gap);
                }
            }
        }
        at_most(worst, 2.0 + 1e-9)
    }),
    ("recomb.internal_moment_descent", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let p = random_distribution(&mut rng, 30, 0.9);
            let out = apply_internal(&p);
            let m = p.mean();
            for s in [1.0, 2.0] {
                worst = worst.max(out.centered_moment(s, m) - p.centered_moment(s, m));
            }
        }
        at_most(worst, 1e-12)
    }),
    ("recomb.internal_support", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut escapes = 0usize;
        for _ in 0..100 {
            let p = random_distribution(&mut rng, 40, 0.9);
            let out = apply_internal(&p);
            escapes += (out.min_support() < p.min_support() || out.max_support() > p.max_support()) as usize;
        }
        at_most(escapes as f64, 0.0)
    }),
    ("genfunc.commuting_diagram", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let p = random_distribution(&mut rng, 24, 0.6);
            let k_max = 2 * p.max_support() + 1;
            let rhs = coeffs_from_distribution(&p, k_max)?.induced_recombinator();
            let lhs = coeffs_from_distribution(&apply_random(&p)?, k_max)?.with_params(rhs.delta(), rhs.gamma())?;
            worst = worst.max(lhs.weighted_metric(&rhs)?);
        }
        at_most(worst, 1e-9)
    }),
    ("genfunc.contraction", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for i in 0..200 {
            let alpha = 0.1 + 1.9 * (i as f64 / 199.0);
            let delta = alpha.max(1.0) * 1.1;
            let a = CoeffVector::new(random_coeff_values(&mut rng, 48, alpha, delta), delta, DEFAULT_GAMMA)?;
            let b = CoeffVector::new(random_coeff_values(&mut rng, 48, alpha, delta), delta, DEFAULT_GAMMA)?;
            let before = a.weighted_metric(&b)?;
            let after = a.induced_recombinator().weighted_metric(&b.induced_recombinator())?;
            worst = worst.max(after / before);
        }
        at_most(worst, 8.0 / 9.0 + 1e-12)
    }),
    ("genfunc.roundtrip", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let p = random_distribution(&mut rng, 20, 0.45);
            let back = distribution_from_coeffs(&coeffs_from_distribution(&p, 40)?, 40)?;
            worst = worst.max((0..=20).map(|k| (back.get(k) - p.get(k)).abs()).fold(0.0, f64::max));
        }
        at_most(worst, 1e-8)
    }),
    ("genfunc.q_monotonicity", |ctx, name| {
        let mut rng = ctx.rng(name);
        let grid = [0.0, 0.3, 0.7, 1.0];
        let mut violations = 0usize;
        for _ in 0..20 {
            let p = random_distribution(&mut rng, 32, 0.5);
            for (i, &q) in grid.iter().enumerate() {
                for &qq in &grid[i..] {
                    violations += !monotonicity_check(&p, q, qq, 64)? as usize;
                }
            }
        }
        at_most(violations as f64, 0.0)
    }),
    ("dynamics.fixed_point_coincidence", |_, _| {
        let cases = [
            (Model::Penalty(0.0), analytic_internal(2.5, 256)?),
            (Model::Penalty(1.0), analytic_random(2.0, 256)?),
            (Model::Takahata, analytic_takahata(1.0, 256)?),
        ];
        let mut worst = 0.0f64;
        for (model, fp) in &cases {
            worst = worst.max(fp.residual);
            let field: f64 = rhs(&fp.distribution, *model)?.iter().map(|v| v.abs()).sum();
            worst = worst.max(field);
        }
        at_most(worst, 1e-9)
    }),
    ("dynamics.continuous_mass", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for model in [Model::Penalty(0.0), Model::Penalty(1.0)] {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.0);
            let cfg = EvolveConfig::continuous(model, 100.0).with_stop_tol(0.0);
            for s in &evolve_continuous(&p0, &cfg)?.samples {
                worst = worst.max((s.state.mass() + s.tail_mass - 1.0).abs());
            }
        }
        at_most(worst, 1e-8)
    }),
    ("dynamics.mean_conservation", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for model in [
            Model::Penalty(0.0),
            Model::Penalty(0.5),
            Model::Penalty(1.0),
            Model::Takahata,
        ] {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.0);
            let steps = if model == Model::Penalty(0.5) { 15 } else { 100 };
            let traj = evolve_discrete(&p0, &EvolveConfig::discrete(model, steps).with_truncation(128))?;
            for s in &traj.samples {
                worst = worst.max((s.mean - traj.initial_mean()).abs() - 128.0 * s.tail_mass);
            }
        }
        at_most(worst, 1e-8)
    }),
    ("dynamics.lyapunov_internal", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut increases = 0usize;
        for _ in 0..5 {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.5);
            let disc = evolve_discrete(&p0, &EvolveConfig::discrete(Model::Penalty(0.0), 300))?;
            let cont = evolve_continuous(&p0, &EvolveConfig::continuous(Model::Penalty(0.0), 30.0))?;
            for traj in [&disc, &cont] {
                increases += traj.increases(|s| s.m1, 1e-10) + traj.increases(|s| s.mr, 1e-10);
            }
        }
        at_most(increases as f64, 0.0)
    }),
    ("dynamics.lyapunov_coefficients", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut increases = 0usize;
        for _ in 0..5 {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.0);
            let disc = evolve_discrete(
                &p0,
                &EvolveConfig::discrete(Model::Penalty(1.0), 50).with_coeff_monitor(32),
            )?;
            let cont = evolve_continuous(
                &p0,
                &EvolveConfig::continuous(Model::Penalty(1.0), 20.0).with_coeff_monitor(32),
            )?;
            for traj in [&disc, &cont] {
                increases += traj.increases(|s| s.coeff_distance.unwrap_or(0.0), 1e-10);
            }
        }
        at_most(increases as f64, 0.0)
    }),
    ("dynamics.flow_and_iteration_agree", |ctx, name| {
        let mut rng = ctx.rng(name);
        let mut worst = 0.0f64;
        for (q, m, t_end) in [(0.0, 2.5, 200.0), (1.0, 2.0, 80.0)] {
            for _ in 0..3 {
                let p0 = random_with_mean(&mut rng, 10, 0.8, m);
                let disc = evolve_discrete(&p0, &EvolveConfig::discrete(Model::Penalty(q), 2000))?;
                let cont = evolve_continuous(&p0, &EvolveConfig::continuous(Model::Penalty(q), t_end))?;
                worst = worst.max(tv_distance(disc.final_state(), cont.final_state()));
            }
        }
        at_most(worst, 1e-6)
    }),
    ("fixpoint.internal_uniqueness", |ctx, name| {
        let mut rng = ctx.rng(name);
        let target = analytic_internal(2.5, 256)?.distribution;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.5);
            let traj = evolve_discrete(
                &p0,
                &EvolveConfig::discrete(Model::Penalty(0.0), 10_000).with_stop_tol(1e-13),
            )?;
            worst = worst.max(tv_distance(traj.final_state(), &target));
        }
        at_most(worst, 1e-6)
    }),
    ("fixpoint.random_uniqueness", |ctx, name| {
        let mut rng = ctx.rng(name);
        let target = analytic_random(2.0, 256)?.distribution;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p0 = random_with_mean(&mut rng, 10, 0.8, 2.0);
            let traj = evolve_discrete(
                &p0,
                &EvolveConfig::discrete(Model::Penalty(1.0), 500).with_stop_tol(1e-13),
            )?;
            worst = worst.max(tv_distance(traj.final_state(), &target));
        }
        at_most(worst, 1e-6)
    }),
    ("fixpoint.recursion_consistency", |_, _| {
        let mut worst = 0.0f64;
        for alpha in [0.25, 0.5, 1.0, 2.0] {
            let rec = fixed_coeffs_recursion(alpha, 20);
            let coeffs = coeffs_from_distribution(&analytic_random(2.0 * alpha, 256)?.distribution, 20)?;
            for k in 0..=20 {
                let scale = rec.get(k).max(1.0);
                worst = worst.max((rec.get(k) - coeffs.get(k)).abs() / scale);
            }
        }
        at_most(worst, 1e-8)
    }),
    ("fixpoint.intermediate_residual", |_, _| {
        let mut worst = 0.0f64;
        for q in [0.25, 0.5, 0.75] {
            let r = solve_numeric(q, 2.0, 96, 1e-11, 5000)?;
            worst = worst.max(r.residual).max((r.distribution.mean() - 2.0).abs() * 1e-2);
        }
        at_most(worst, 1e-10)
    }),
    ("fixpoint.intermediate_irreversible", |_, _| {
        let mut weakest = f64::INFINITY;
        for q in [0.25, 0.5, 0.75] {
            let r = solve_numeric(q, 2.0, 96, 1e-11, 5000)?;
            weakest = weakest.min(reversibility_residual(&r.distribution, &KernelQ::new(q)?, 12));
        }
        at_least(weakest, 1e-4)
    }),
    ("fixpoint.takahata_b_coefficients", |_, _| {
        let p = analytic_takahata(1.0, 256)?.distribution;
        let b = coeffs_from_distribution(&p, 15)?.takahata_b();
        at_most(b.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max), 1e-6)
    }),
];

pub fn check_names() -> Vec<&'static str> {
    let mut names: Vec<_> = CHECKS.iter().map(|(name, _)| *name).collect();
    names.sort_unstable();
    names
}

pub fn verify_suite(cfg: &VerifyConfig) -> VerifyReport {
    let ctx = Ctx {
        seed: cfg.seed,
        fault: cfg.fault,
    };
    let mut checks: Vec<CheckResult> = CHECKS
        .par_iter()
        .map(|(name, check)| {
            let (measured, tolerance, passed) = check(&ctx, name).unwrap_or((f64::NAN, f64::NAN, false));
            CheckResult {
                name: (*name).to_string(),
                passed,
                measured,
                tolerance,
            }
        })
        .collect();
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    VerifyReport {
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
