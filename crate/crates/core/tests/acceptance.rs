//! Acceptance criteria for the UC toolkit. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uc_core::dynamics::{coeff_evolve_continuous, coeff_evolve_discrete, Trajectory};
use uc_core::genfunc::{estimate_delta, DEFAULT_GAMMA};
use uc_core::kernel::validate_probabilities;
use uc_core::sample::{random_coeff_values, random_distribution, random_with_mean};
use uc_core::*;

const SEED: u64 = 20_240_611;

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn rng(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED + criterion)
}

/// Normalization constant from its closed form; independent of the
/// direct sum in the kernel.
fn closed_form_c(q: f64, k: usize, l: usize) -> f64 {
    let s = k.min(l) as f64;
    let gap = (k as f64 - l as f64).abs();
    let one_minus = (1.0 - q) * (1.0 - q);
    let geometric = s - (s + 1.0) * q + q.powi(k.min(l) as i32 + 1);
    one_minus / ((s + 1.0) * (gap + 1.0) * one_minus + 2.0 * q * geometric)
}

/// `p_k = (2/(m+2))^2 (k+1) (m/(m+2))^k`, evaluated termwise.
fn random_fixed_point_entry(m: f64, k: usize) -> f64 {
    let x = m / (m + 2.0);
    (2.0 / (m + 2.0)).powi(2) * (k + 1) as f64 * x.powi(k as i32)
}

fn kernel_exactness() -> Result<Outcome> {
    let start = Instant::now();
    let (mut sum_dev, mut mean_dev) = (0.0f64, 0.0f64);
    for q in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let kernel = KernelQ::new(q)?;
        for k in 0..=40 {
            for l in 0..=40 {
                let report = validate_probabilities(&kernel.row(k, l), k + l);
                sum_dev = sum_dev.max(report.sum_deviation);
                mean_dev = mean_dev.max(report.mean_deviation);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        sum_dev <= 1e-12 && mean_dev <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("max row-sum dev {sum_dev:.2e}, max mean dev {mean_dev:.2e}, {elapsed:.2?}"),
    )
}

fn closed_form_constants() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999] {
        let kernel = KernelQ::new(q)?;
        for k in 0..=30 {
            for l in 0..=30 {
                worst = worst.max((kernel.c_coefficient(k, l) - closed_form_c(q, k, l)).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |C - closed form| {worst:.2e}"))
}

fn specialization_equivalence() -> Result<Outcome> {
    let mut rng = rng(3);
    let general0 = RecombinatorSpec::general(0.0)?;
    let general1 = RecombinatorSpec::general(1.0)?;
    let (mut internal, mut random) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = random_distribution(&mut rng, 64, 0.95);
        internal = internal.max(tv_distance(&general0.apply(&p)?, &apply_internal(&p)));
        random = random.max(tv_distance(&general1.apply(&p)?, &apply_random(&p)?));
    }
    outcome(
        internal <= 1e-12 && random <= 1e-12,
        format!("TV(q=0 vs internal) {internal:.2e}, TV(q=1 vs pi*pi) {random:.2e}"),
    )
}

fn internal_fixed_points() -> Result<Outcome> {
    let mut residual = 0.0f64;
    for m in [0.0, 1.5, 2.5, 7.25] {
        residual = residual.max(analytic_internal(m, 256)?.residual);
    }
    let target = analytic_internal(2.5, 256)?.distribution;
    let oracle = tv_distance(&target, &Distribution::new(vec![0.0, 0.0, 0.5, 0.5])?);

    let mut rng = rng(4);
    let mut worst_iterations = 0usize;
    let mut unconverged = 0usize;
    for _ in 0..20 {
        let p0 = random_with_mean(&mut rng, 10, 0.8, 2.5);
        let cfg = EvolveConfig::discrete(Model::Penalty(0.0), 10_000)
            .with_stop_tol(0.0)
            .with_target(target.clone());
        let traj = evolve_discrete(&p0, &cfg)?;
        match traj
            .samples
            .iter()
            .position(|s| s.tv_to_target.is_some_and(|tv| tv < 1e-6))
        {
            Some(i) => worst_iterations = worst_iterations.max(i),
            None => unconverged += 1,
        }
    }
    outcome(
        residual <= 1e-12 && oracle == 0.0 && unconverged == 0,
        format!("max residual {residual:.2e}; 20 starts reach TV < 1e-6 by iteration {worst_iterations} ({unconverged} never)"),
    )
}

fn lyapunov_descent() -> Result<Outcome> {
    let mut rng = rng(5);
    let mut trajectories = 0usize;
    let (mut worst_rise, mut weakest_drop) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut means: Vec<(f64, usize)> = vec![(2.5, 10_000); 20];
    means.extend([
        (1.5, 3000),
        (3.7, 3000),
        (0.4, 3000),
        (6.25, 3000),
        (2.0, 2000),
        (3.0, 2000),
    ]);
    for (m, steps) in means {
        let p0 = random_with_mean(&mut rng, 12, 0.85, m);
        let target = analytic_internal(p0.mean(), 256)?.distribution;
        let cfg = EvolveConfig::discrete(Model::Penalty(0.0), steps)
            .with_stop_tol(0.0)
            .with_target(target);
        let traj = evolve_discrete(&p0, &cfg)?;
        for pair in traj.samples.windows(2) {
            let (before, after) = (&pair[0], &pair[1]);
            for (b, a) in [(before.m1, after.m1), (before.mr, after.mr)] {
                worst_rise = worst_rise.max(a - b);
                if before.tv_to_target.unwrap_or(0.0) >= 1e-6 {
                    weakest_drop = weakest_drop.min(b - a);
                }
            }
        }
        trajectories += 1;
    }
    outcome(
        worst_rise <= 1e-10 && weakest_drop > 1e-12,
        format!("{trajectories} trajectories: largest step rise {worst_rise:.2e}, smallest drop away from the fixed point {weakest_drop:.2e}"),
    )
}

fn random_fixed_points() -> Result<Outcome> {
    let mut residual = 0.0f64;
    let mut oracle = 0.0f64;
    for m in [0.0, 1.0, 2.0, 5.0] {
        let fp = analytic_random(m, 256)?;
        residual = residual.max(fp.residual);
        for k in 0..=60 {
            oracle = oracle.max((fp.distribution.get(k) - random_fixed_point_entry(m, k)).abs());
        }
    }
    let p = analytic_random(2.0, 256)?.distribution;
    let head = (p.get(0) - 0.25)
        .abs()
        .max((p.get(1) - 0.25).abs())
        .max((p.get(2) - 0.1875).abs());
    outcome(
        residual <= 1e-9 && head <= 1e-12 && oracle <= 1e-14,
        format!("max residual {residual:.2e}; |p0..p2 - (1/4, 1/4, 3/16)| {head:.2e}; termwise oracle {oracle:.2e}"),
    )
}

fn commuting_diagram_and_contraction() -> Result<Outcome> {
    let mut rng = rng(7);
    let mut diagram = 0.0f64;
    for _ in 0..100 {
        let p = random_distribution(&mut rng, 24, 0.6);
        let k_max = 2 * p.max_support() + 1;
        let via_coeffs = coeffs_from_distribution(&p, k_max)?.induced_recombinator();
        let via_recomb = coeffs_from_distribution(&apply_random(&p)?, k_max)?;
        for k in 0..=k_max {
            let (a, b) = (via_recomb.get(k), via_coeffs.get(k));
            diagram = diagram.max((a - b).abs() / b.abs().max(1.0));
        }
    }

    let mut ratio = 0.0f64;
    let mut pairs = 0usize;
    for _ in 0..300 {
        let alpha: f64 = rng.gen_range(0.05..3.0);
        let delta = alpha.max(1.0) * rng.gen_range(1.0..1.5);
        let a = CoeffVector::new(random_coeff_values(&mut rng, 40, alpha, delta), delta, DEFAULT_GAMMA)?;
        let b = CoeffVector::new(random_coeff_values(&mut rng, 40, alpha, delta), delta, DEFAULT_GAMMA)?;
        ratio =
            ratio.max(a.induced_recombinator().weighted_metric(&b.induced_recombinator())? / a.weighted_metric(&b)?);
        pairs += 1;
    }
    for _ in 0..200 {
        let m = rng.gen_range(0.5..4.0);
        let a = coeffs_from_distribution(&random_with_mean(&mut rng, 12, 0.8, m), 40)?;
        let b = coeffs_from_distribution(&random_with_mean(&mut rng, 12, 0.8, m), 40)?;
        let delta = estimate_delta(a.values()).max(estimate_delta(b.values()));
        let a = a.with_params(delta, DEFAULT_GAMMA)?;
        let b = b.with_params(delta, DEFAULT_GAMMA)?;
        let gap = a.weighted_metric(&b)?;
        if gap > 1e-14 {
            ratio = ratio.max(a.induced_recombinator().weighted_metric(&b.induced_recombinator())? / gap);
            pairs += 1;
        }
    }
    outcome(
        diagram <= 1e-9 && ratio <= 8.0 / 9.0 + 1e-12,
        format!("diagram defect {diagram:.2e}; max contraction ratio {ratio:.6} over {pairs} pairs (bound 8/9)"),
    )
}

fn random_convergence() -> Result<Outcome> {
    let target = analytic_random(2.0, 256)?.distribution;
    let mut rng = rng(8);
    let mut starts = vec![Distribution::point_mass(2)];
    starts.extend((0..10).map(|_| random_with_mean(&mut rng, 10, 0.8, 2.0)));

    let (mut tv, mut monitored, mut coeff_space) = (0.0f64, 0.0f64, 0.0f64);
    for p0 in &starts {
        let discrete = EvolveConfig::discrete(Model::Penalty(1.0), 50)
            .with_target(target.clone())
            .with_coeff_monitor(32);
        let continuous = EvolveConfig::continuous(Model::Penalty(1.0), 50.0)
            .with_dt(0.1)
            .with_target(target.clone())
            .with_coeff_monitor(32);
        for traj in [evolve_discrete(p0, &discrete)?, evolve_continuous(p0, &continuous)?] {
            let last = traj.final_sample();
            tv = tv.max(last.tv_to_target.unwrap_or(f64::INFINITY));
            monitored = monitored.max(last.coeff_distance.unwrap_or(f64::INFINITY));
        }
        let a0 = coeffs_from_distribution(p0, 32)?;
        let ones = CoeffVector::geometric(1.0, 32).with_params(a0.delta(), a0.gamma())?;
        for samples in [
            coeff_evolve_discrete(&a0, 50)?,
            coeff_evolve_continuous(&a0, 50.0, 0.1)?,
        ] {
            let last = samples.last().expect("initial sample is always recorded");
            coeff_space = coeff_space.max(last.coeffs.weighted_metric(&ones)?);
        }
    }
    outcome(
        tv < 1e-5 && monitored < 1e-6 && coeff_space < 1e-6,
        format!(
            "{} starts, both modes at t=50: max TV {tv:.2e}; coefficient distance {monitored:.2e} (state), {coeff_space:.2e} (coefficient flow)",
            starts.len()
        ),
    )
}

fn conservation_along_flows() -> Result<Outcome> {
    let mut rng = rng(9);
    let (mut mass, mut mean) = (0.0f64, f64::NEG_INFINITY);
    let mut runs = 0usize;
    let cases = [
        (Model::Penalty(0.0), 256),
        (Model::Penalty(0.5), 64),
        (Model::Penalty(1.0), 256),
        (Model::Takahata, 256),
    ];
    let check = |traj: &Trajectory, nmax: usize, mass: &mut f64, mean: &mut f64| {
        let m0 = traj.initial_mean();
        for s in &traj.samples {
            *mass = mass.max((s.state.mass() + s.tail_mass - 1.0).abs());
            *mean = mean.max((s.mean - m0).abs() - nmax as f64 * s.tail_mass);
        }
    };
    for (model, nmax) in cases {
        for _ in 0..2 {
            let m = rng.gen_range(0.5..4.0);
            let p0 = random_with_mean(&mut rng, 10, 0.8, m);
            let discrete = EvolveConfig::discrete(model, 100)
                .with_stop_tol(0.0)
                .with_truncation(nmax);
            let continuous = EvolveConfig::continuous(model, 100.0)
                .with_stop_tol(0.0)
                .with_truncation(nmax);
            check(&evolve_discrete(&p0, &discrete)?, nmax, &mut mass, &mut mean);
            check(&evolve_continuous(&p0, &continuous)?, nmax, &mut mass, &mut mean);
            runs += 2;
        }
    }
    outcome(
        mass <= 1e-8 && mean <= 1e-8,
        format!("{runs} trajectories to t=100: max mass error {mass:.2e}, max mean error beyond N*leak {mean:.2e}"),
    )
}

fn intermediate_q() -> Result<Outcome> {
    let (mut residual, mut reversibility, mut mean_err) = (0.0f64, f64::INFINITY, 0.0f64);
    let mut positivity = true;
    let mut reach = usize::MAX;
    for q in [0.25, 0.5, 0.75] {
        let fp = solve_numeric(q, 2.0, 256, 1e-11, 10_000)?;
        let p = &fp.distribution;
        residual = residual.max(fp.residual);
        mean_err = mean_err.max((p.mean() - 2.0).abs());
        let last = p.values().iter().rposition(|&v| v >= 1e-14).unwrap_or(0);
        positivity &= p.values()[..=last].iter().all(|&v| v > 0.0) && p.values().iter().all(|&v| v >= 0.0);
        reach = reach.min(last);
        reversibility = reversibility.min(reversibility_residual(p, &KernelQ::new(q)?, 12));
    }

    let mut rng = rng(10);
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let (mut checked, mut violations) = (0usize, 0usize);
    for _ in 0..100 {
        let p = random_distribution(&mut rng, 20, 0.7);
        for (i, &q) in grid.iter().enumerate() {
            for &qq in &grid[i + 1..] {
                checked += 1;
                violations += !monotonicity_check(&p, q, qq, 32)? as usize;
            }
        }
    }
    outcome(
        residual < 1e-10 && positivity && reversibility > 1e-4 && mean_err <= 1e-8 && violations == 0,
        format!(
            "max residual {residual:.2e}; positive through k={reach}; min reversibility defect {reversibility:.2e}; mean error {mean_err:.1e}; monotonicity {violations}/{checked} violations"
        ),
    )
}

fn takahata_variant() -> Result<Outcome> {
    let fp = analytic_takahata(1.0, 256)?;
    let oracle = (0..=60)
        .map(|k| (fp.distribution.get(k) - 0.5f64.powi(k as i32 + 1)).abs())
        .fold(0.0, f64::max);
    let b = coeffs_from_distribution(&fp.distribution, 15)?.takahata_b();
    let b_dev = b.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    outcome(
        fp.residual <= 1e-9 && b_dev <= 1e-6 && b.len() == 16 && oracle <= 1e-15,
        format!(
            "residual {:.2e}; max |b_k - 1| for k <= 15 {b_dev:.2e}; geometric oracle {oracle:.2e}",
            fp.residual
        ),
    )
}

fn lipschitz_bound() -> Result<Outcome> {
    let mut rng = rng(12);
    let models = [
        Model::Penalty(0.0),
        Model::Penalty(0.25),
        Model::Penalty(0.5),
        Model::Penalty(0.75),
        Model::Penalty(1.0),
        Model::Takahata,
    ];
    let mut ratio = 0.0f64;
    for i in 0..200 {
        let spec = models[i % models.len()].recombinator()?;
        let p = random_distribution(&mut rng, 30, 0.85);
        let other = random_distribution(&mut rng, 30, 0.85);
        // half the pairs are small perturbations, which probe the local constant
        let r = if i % 2 == 0 {
            other
        } else {
            Distribution::mix(rng.gen_range(1e-4..1e-1), &other, &p)?
        };
        let gap = tv_distance(&p, &r);
        if gap > 0.0 {
            ratio = ratio.max(tv_distance(&spec.apply(&p)?, &spec.apply(&r)?) / gap);
        }
    }
    outcome(
        ratio <= 2.0 + 1e-9,
        format!("max |R p - R p'| / |p - p'| over 200 pairs {ratio:.6}"),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("kernel exactness", kernel_exactness),
        ("closed-form normalization", closed_form_constants),
        ("specialization equivalence", specialization_equivalence),
        ("q=0 fixed points", internal_fixed_points),
        ("q=0 Lyapunov descent", lyapunov_descent),
        ("q=1 fixed points", random_fixed_points),
        ("coefficient diagram and contraction", commuting_diagram_and_contraction),
        ("q=1 convergence", random_convergence),
        ("conservation along flows", conservation_along_flows),
        ("intermediate q", intermediate_q),
        ("Takahata variant", takahata_variant),
        ("Lipschitz bound", lipschitz_bound),
    ];
    let total = Instant::now();
    let mut failed = 0;
    for (n, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !passed as usize;
        println!(
            "{} criterion {:>2} ({title}): {detail} [{:.2?}]",
            if passed { "PASS" } else { "FAIL" },
            n + 1,
            start.elapsed()
        );
    }
    println!(
        "{} of {} criteria passed in {:.2?}",
        criteria.len() - failed,
        criteria.len(),
        total.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
