//! `uc`: command-line runner for UC recombination experiments.
//!
//! Exit codes: 0 on success, 1 for invalid input or usage, 2 when the
//! numerics fail (non-convergence, truncation leak, lost positivity) or a
//! verification check fails.

// `!(x > 0.0)` is the NaN-rejecting form used for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uc_core::dynamics::{DEFAULT_DT, DEFAULT_STOP_TOL};
use uc_core::fixpoint::{analytic_fixed_point, DEFAULT_REVERSIBILITY_WINDOW};
use uc_core::genfunc::{estimate_delta, DEFAULT_COEFF_TRUNCATION, DEFAULT_GAMMA};
use uc_core::io::{read_distribution, write_coeffs, write_distribution, write_kernel_row, write_trajectory};
use uc_core::measure::DEFAULT_TRUNCATION;
use uc_core::verify::{verify_suite, Fault, VerifyConfig, DEFAULT_SEED};
use uc_core::{
    coeffs_from_distribution, evolve_continuous, evolve_discrete, reversibility_residual, solve_numeric, Distribution,
    EvolveConfig, KernelQ, Model, Provenance, UcError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "uc", version, about = "Unequal-crossover recombination dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print one kernel row `T_{i(k+l-i),kl}` as CSV (i,j,T).
    Kernel {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply one recombination to a distribution CSV.
    Step {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        nmax: usize,
    },
    /// Evolve a distribution in discrete or continuous time.
    Evolve(EvolveArgs),
    /// Fixed point with a given mean: closed form where known, iteration otherwise.
    Fixpoint {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        nmax: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Distribution CSV; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON report; standard error if omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Size-biased generating-function coefficients of a distribution (k,a).
    Coeffs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "K", default_value_t = DEFAULT_COEFF_TRUNCATION)]
        k_max: usize,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        /// Growth bound; estimated from the coefficients if omitted.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded invariant suite and print a JSON report.
    Verify {
        #[arg(long, env = "UC_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("model").required(true).args(["q", "takahata"])))]
struct ModelArgs {
    /// Penalty parameter in [0, 1].
    #[arg(long)]
    q: Option<f64>,
    /// Use Takahata's uniform-split kernel instead.
    #[arg(long)]
    takahata: bool,
}

impl ModelArgs {
    fn model(&self) -> Model {
        match self.q {
            Some(q) if !self.takahata => Model::Penalty(q),
            _ => Model::Takahata,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    SkipKernelNormalization,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[arg(long, value_enum, default_value = "discrete")]
    mode: ModeArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    nmax: usize,
    /// Stop once successive states are this close in TV; 0 disables.
    #[arg(long, default_value_t = DEFAULT_STOP_TOL)]
    stop_tol: f64,
    /// Distribution CSV to report the TV distance to.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Trajectory CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Final-state CSV; defaults to `<out>.final.csv` when --out is given.
    #[arg(long)]
    final_state: Option<PathBuf>,
    /// JSON summary; standard error if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvolveSummary {
    model: String,
    mode: &'static str,
    final_state: Option<PathBuf>,
    iterations: usize,
    final_time: f64,
    final_residual: f64,
    converged: bool,
    final_tv_to_target: Option<f64>,
    tail_mass: f64,
    clipped_mass: f64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct FixpointReport {
    model: String,
    mean_target: f64,
    mean: f64,
    residual: f64,
    iterations: usize,
    provenance: &'static str,
    converged: bool,
    reversibility_residual: Option<f64>,
    tail_mass: f64,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<UcError>() {
                Some(e) if e.is_numerical() => EXIT_NUMERICAL,
                _ => EXIT_INVALID,
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Kernel { q, k, l, out } => {
            let kernel = KernelQ::new(q)?;
            write_kernel_row(output(out.as_deref())?, &kernel, k, l)?;
            Ok(EXIT_OK)
        }
        Command::Step {
            model,
            input,
            out,
            nmax,
        } => {
            check_nmax(nmax)?;
            let p = read_input(&input)?;
            let next = model.model().recombinator()?.with_truncation(nmax).apply(&p)?;
            write_distribution(output(out.as_deref())?, &next)?;
            Ok(EXIT_OK)
        }
        Command::Evolve(args) => evolve(args),
        Command::Fixpoint {
            model,
            m,
            nmax,
            tol,
            max_iter,
            out,
            report,
        } => fixpoint(model.model(), m, nmax, tol, max_iter, out.as_deref(), report.as_deref()),
        Command::Coeffs {
            input,
            k_max,
            gamma,
            delta,
            out,
        } => {
            let p = read_input(&input)?;
            let a = coeffs_from_distribution(&p, k_max)?;
            let delta = delta.unwrap_or_else(|| estimate_delta(a.values()));
            let a = a.with_params(delta, gamma)?;
            if !a.membership() {
                eprintln!("warning: coefficients exceed delta^k for delta = {delta}");
            }
            write_coeffs(output(out.as_deref())?, &a)?;
            Ok(EXIT_OK)
        }
        Command::Verify { seed, inject_fault } => {
            let fault = inject_fault.map(|FaultArg::SkipKernelNormalization| Fault::SkipKernelNormalization);
            let report = verify_suite(&VerifyConfig { seed, fault });
            for check in report.failures() {
                eprintln!(
                    "FAIL {}: measured {:e}, tolerance {:e}",
                    check.name, check.measured, check.tolerance
                );
            }
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &report)?;
            writeln!(stdout)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_NUMERICAL })
        }
    }
}

fn evolve(args: EvolveArgs) -> anyhow::Result<i32> {
    check_nmax(args.nmax)?;
    if args.stop_tol < 0.0 {
        bail!(UcError::InvalidParameter(format!(
            "--stop-tol must be >= 0, got {}",
            args.stop_tol
        )));
    }
    let model = args.model.model();
    model.recombinator()?;
    let p0 = read_input(&args.input)?;
    let mut cfg = match args.mode {
        ModeArg::Discrete => EvolveConfig::discrete(model, args.steps),
        ModeArg::Continuous => EvolveConfig::continuous(model, args.t_end).with_dt(args.dt),
    }
    .with_truncation(args.nmax)
    .with_stop_tol(args.stop_tol);
    if let Some(path) = &args.target {
        cfg = cfg.with_target(read_input(path)?);
    }

    let start = Instant::now();
    let trajectory = match args.mode {
        ModeArg::Discrete => evolve_discrete(&p0, &cfg)?,
        ModeArg::Continuous => evolve_continuous(&p0, &cfg)?,
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    write_trajectory(output(args.out.as_deref())?, &trajectory)?;
    let final_path = args
        .final_state
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("final.csv")));
    if let Some(path) = &final_path {
        write_distribution(create(path)?, trajectory.final_state())?;
    }

    let last = trajectory.final_sample();
    let summary = EvolveSummary {
        model: model.label(),
        mode: match args.mode {
            ModeArg::Discrete => "discrete",
            ModeArg::Continuous => "continuous",
        },
        final_state: final_path,
        iterations: trajectory.samples.len() - 1,
        final_time: last.t,
        final_residual: trajectory.last_step_change(),
        converged: trajectory.converged,
        final_tv_to_target: last.tv_to_target,
        tail_mass: last.tail_mass,
        clipped_mass: trajectory.clipped_mass,
        wall_time_s,
    };
    write_report(args.report.as_deref(), &summary)?;
    Ok(EXIT_OK)
}

fn fixpoint(
    model: Model,
    m: f64,
    nmax: usize,
    tol: f64,
    max_iter: usize,
    out: Option<&Path>,
    report: Option<&Path>,
) -> anyhow::Result<i32> {
    check_nmax(nmax)?;
    if !(tol > 0.0) {
        bail!(UcError::InvalidParameter(format!("--tol must be positive, got {tol}")));
    }
    model.recombinator()?;
    let (result, converged, failure) = match analytic_fixed_point(model, m, nmax) {
        Some(result) => (result?, true, None),
        None => {
            let Model::Penalty(q) = model else {
                unreachable!("Takahata has a closed form")
            };
            match solve_numeric(q, m, nmax, tol, max_iter) {
                Ok(result) => (result, true, None),
                Err(UcError::NotConverged { iterations, best }) => {
                    let message = format!(
                        "no convergence within {iterations} iterations (residual {:e}); wrote the best iterate",
                        best.residual
                    );
                    (*best, false, Some(message))
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    write_distribution(output(out)?, &result.distribution)?;
    let reversibility_residual = match model {
        Model::Penalty(q) => Some(reversibility_residual(
            &result.distribution,
            &KernelQ::new(q)?,
            DEFAULT_REVERSIBILITY_WINDOW,
        )),
        Model::Takahata => None,
    };
    let (provenance, iterations) = match result.provenance {
        Provenance::Analytic => ("analytic", 0),
        Provenance::Iterative { iterations } => ("iterative", iterations),
    };
    write_report(
        report,
        &FixpointReport {
            model: model.label(),
            mean_target: m,
            mean: result.distribution.mean(),
            residual: result.residual,
            iterations,
            provenance,
            converged,
            reversibility_residual,
            tail_mass: result.distribution.tail_mass(),
        },
    )?;
    match failure {
        Some(message) => {
            eprintln!("error: {message}");
            Ok(EXIT_NUMERICAL)
        }
        None => Ok(EXIT_OK),
    }
}

fn check_nmax(nmax: usize) -> anyhow::Result<()> {
    if nmax < 2 {
        bail!(UcError::InvalidParameter(format!(
            "--nmax must be at least 2, got {nmax}"
        )));
    }
    Ok(())
}

fn read_input(path: &Path) -> anyhow::Result<Distribution> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_distribution(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_report<T: Serialize>(path: Option<&Path>, report: &T) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut stderr = io::stderr().lock();
            serde_json::to_writer_pretty(&mut stderr, report)?;
            writeln!(stderr)?;
        }
    }
    Ok(())
}
