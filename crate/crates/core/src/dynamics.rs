//! Time evolution `p(t+1) = R(p(t))` and `dp/dt = R(p) - p`, with the
//! monitored functionals recorded along the way.

use crate::error::{Result, UcError};
use crate::genfunc::{coeffs_from_distribution, estimate_delta, CoeffVector, DEFAULT_GAMMA};
use crate::measure::{l1_distance, tv_distance, Distribution, DEFAULT_LEAK_THRESHOLD, DEFAULT_TRUNCATION};
use crate::recomb::{Model, RecombinatorSpec};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_STOP_TOL: f64 = 1e-10;
pub const DEFAULT_MOMENT_ORDER: f64 = 2.0;

/// Negative entries beyond this are integrator instability, not roundoff.
const POSITIVITY_LIMIT: f64 = 1e-9;
/// Allowed drift of total mass (stored plus tail) per accepted step.
const MASS_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct EvolveConfig {
    pub mode: Mode,
    pub model: Model,
    /// Generations (discrete mode).
    pub steps: usize,
    /// Final time (continuous mode).
    pub t_end: f64,
    pub dt: f64,
    /// Stop once successive states are closer than this in L1; zero disables.
    pub stop_tol: f64,
    pub target: Option<Distribution>,
    pub truncation: usize,
    pub leak_threshold: f64,
    /// Order `r` of the second monitored centered moment.
    pub moment_order: f64,
    /// Record the coefficient-space Lyapunov distance with this many
    /// coefficients (random UC and Takahata only).
    pub coeff_monitor: Option<usize>,
}

impl EvolveConfig {
    pub fn discrete(model: Model, steps: usize) -> Self {
        Self {
            mode: Mode::Discrete,
            model,
            steps,
            t_end: steps as f64,
            dt: 1.0,
            stop_tol: DEFAULT_STOP_TOL,
            target: None,
            truncation: DEFAULT_TRUNCATION,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
            moment_order: DEFAULT_MOMENT_ORDER,
            coeff_monitor: None,
        }
    }

    pub fn continuous(model: Model, t_end: f64) -> Self {
        Self {
            mode: Mode::Continuous,
            dt: DEFAULT_DT,
            t_end,
            ..Self::discrete(model, 0)
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn with_target(mut self, target: Distribution) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_truncation(mut self, nmax: usize) -> Self {
        self.truncation = nmax;
        self
    }

    pub fn with_leak_threshold(mut self, threshold: f64) -> Self {
        self.leak_threshold = threshold;
        self
    }

    pub fn with_coeff_monitor(mut self, k_max: usize) -> Self {
        self.coeff_monitor = Some(k_max);
        self
    }

    fn recombinator(&self) -> Result<RecombinatorSpec> {
        Ok(self
            .model
            .recombinator()?
            .with_truncation(self.truncation)
            .with_leak_threshold(self.leak_threshold))
    }

    fn validate(&self, p0: &Distribution) -> Result<()> {
        if p0.len() > self.truncation + 1 {
            return Err(UcError::InvalidParameter(format!(
                "initial support {} exceeds truncation N = {}",
                p0.max_support(),
                self.truncation
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(UcError::InvalidParameter("stop tolerance must be nonnegative".into()));
        }
        if self.mode == Mode::Continuous {
            if !(self.dt > 0.0 && self.dt <= 1.0) {
                return Err(UcError::InvalidParameter(format!(
                    "dt = {} must lie in (0, 1]",
                    self.dt
                )));
            }
            if !(self.t_end > 0.0 && self.t_end.is_finite()) {
                return Err(UcError::InvalidParameter("t_end must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Distribution,
    pub mean: f64,
    pub m1: f64,
    pub mr: f64,
    pub tv_to_target: Option<f64>,
    pub tail_mass: f64,
    pub coeff_distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Total negative mass clipped to zero by the integrator.
    pub clipped_mass: f64,
    /// Whether the successive-state tolerance stopped the run.
    pub converged: bool,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory holds the initial condition")
    }

    pub fn final_state(&self) -> &Distribution {
        &self.final_sample().state
    }

    pub fn initial_mean(&self) -> f64 {
        self.samples[0].mean
    }

    /// Number of steps where `value` increased by more than `tol`.
    pub fn increases(&self, value: impl Fn(&Sample) -> f64, tol: f64) -> usize {
        self.samples
            .windows(2)
            .filter(|w| value(&w[1]) > value(&w[0]) + tol)
            .count()
    }

    /// L1 distance between the last two states.
    pub fn last_step_change(&self) -> f64 {
        match self.samples.as_slice() {
            [.., a, b] => tv_distance(&a.state, &b.state),
            _ => 0.0,
        }
    }
}

/// Tracks the distance of the coefficients to the geometric fixed point
/// `(1, alpha, alpha^2, ...)` under a metric frozen at the initial state.
struct CoeffMonitor {
    k_max: usize,
    takahata: bool,
    reference: CoeffVector,
}

impl CoeffMonitor {
    fn new(model: Model, k_max: usize, p0: &Distribution) -> Result<Option<Self>> {
        let takahata = match model {
            Model::Penalty(1.0) => false,
            Model::Takahata => true,
            Model::Penalty(_) => return Ok(None),
        };
        let values = Self::raw(takahata, p0, k_max)?;
        let alpha = values[1];
        let reference = CoeffVector::geometric(alpha, k_max);
        let delta = estimate_delta(&values).max(reference.delta());
        let reference = reference.with_params(delta, DEFAULT_GAMMA)?;
        Ok(Some(Self {
            k_max,
            takahata,
            reference,
        }))
    }

    fn raw(takahata: bool, p: &Distribution, k_max: usize) -> Result<Vec<f64>> {
        let a = coeffs_from_distribution(p, k_max)?;
        Ok(if takahata { a.takahata_b() } else { a.values().to_vec() })
    }

    fn distance(&self, p: &Distribution) -> Result<f64> {
        let values = Self::raw(self.takahata, p, self.k_max)?;
        let current = CoeffVector::new(values, self.reference.delta(), self.reference.gamma())?;
        current.weighted_metric(&self.reference)
    }
}

struct Recorder<'a> {
    cfg: &'a EvolveConfig,
    coeffs: Option<CoeffMonitor>,
    samples: Vec<Sample>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a EvolveConfig, p0: &Distribution) -> Result<Self> {
        let coeffs = match cfg.coeff_monitor {
            Some(k_max) => CoeffMonitor::new(cfg.model, k_max, p0)?,
            None => None,
        };
        Ok(Self {
            cfg,
            coeffs,
            samples: Vec::new(),
        })
    }

    fn record(&mut self, t: f64, state: Distribution) -> Result<()> {
        let moments = state.moments(self.cfg.moment_order);
        let coeff_distance = match &self.coeffs {
            Some(monitor) => Some(monitor.distance(&state)?),
            None => None,
        };
        self.samples.push(Sample {
            t,
            mean: moments.mean,
            m1: moments.m1,
            mr: moments.mr,
            tv_to_target: self.cfg.target.as_ref().map(|target| tv_distance(&state, target)),
            tail_mass: state.tail_mass(),
            coeff_distance,
            state,
        });
        Ok(())
    }
}

/// Iterates the recombinator for `cfg.steps` generations.
pub fn evolve_discrete(p0: &Distribution, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.validate(p0)?;
    let spec = cfg.recombinator()?;
    let mut recorder = Recorder::new(cfg, p0)?;
    recorder.record(0.0, p0.clone())?;
    let mut current = p0.clone();
    let mut converged = false;
    for step in 1..=cfg.steps {
        let next = spec.apply(&current)?;
        let change = tv_distance(&next, &current);
        recorder.record(step as f64, next.clone())?;
        current = next;
        if change < cfg.stop_tol {
            converged = true;
            break;
        }
    }
    Ok(Trajectory {
        samples: recorder.samples,
        clipped_mass: 0.0,
        converged,
    })
}

/// Vector field `R(p) - p` (time scale one).
pub fn rhs(p: &Distribution, model: Model) -> Result<Vec<f64>> {
    let spec = model.recombinator()?.with_truncation(2 * p.len());
    let (out, _) = spec.apply_raw(p.values());
    let len = out.len().max(p.len());
    Ok((0..len)
        .map(|k| out.get(k).copied().unwrap_or(0.0) - p.get(k))
        .collect())
}

/// State of the truncated flow: entries `0..=N` plus the mass that has
/// left the window, integrated as one extra coordinate.
struct FlowField<'a> {
    spec: &'a RecombinatorSpec,
    len: usize,
}

impl FlowField<'_> {
    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let (out, leak) = self.spec.apply_raw(&y[..self.len]);
        for k in 0..self.len {
            dy[k] = out.get(k).copied().unwrap_or(0.0) - y[k];
        }
        dy[self.len] = leak;
    }
}

/// Classical fourth-order Runge-Kutta with fixed step `cfg.dt` up to `cfg.t_end`.
pub fn evolve_continuous(p0: &Distribution, cfg: &EvolveConfig) -> Result<Trajectory> {
    cfg.validate(p0)?;
    let spec = cfg.recombinator()?;
    let len = cfg.truncation + 1;
    let field = FlowField { spec: &spec, len };

    let mut recorder = Recorder::new(cfg, p0)?;
    recorder.record(0.0, p0.clone())?;

    let mut y = vec![0.0; len + 1];
    y[..p0.len()].copy_from_slice(p0.values());
    y[len] = p0.tail_mass();
    let total0: f64 = y.iter().sum();

    let n_steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let mut stages = [
        vec![0.0; len + 1],
        vec![0.0; len + 1],
        vec![0.0; len + 1],
        vec![0.0; len + 1],
    ];
    let mut scratch = vec![0.0; len + 1];
    let mut clipped_mass = 0.0;
    let mut converged = false;
    let mut t_prev = 0.0;

    for step in 1..=n_steps {
        let t = if step == n_steps {
            cfg.t_end
        } else {
            step as f64 * cfg.dt
        };
        let h = t - t_prev;
        rk4_step(&field, &y, h, &mut stages, &mut scratch);
        let next = &scratch;

        for (index, v) in next[..len].iter().enumerate() {
            if *v < -POSITIVITY_LIMIT {
                return Err(UcError::PositivityLost { t, index, value: *v });
            }
        }
        let mut next = next.clone();
        for v in next[..len].iter_mut() {
            if *v < 0.0 {
                clipped_mass -= *v;
                *v = 0.0;
            }
        }
        let total: f64 = next.iter().sum();
        if (total - total0).abs() > MASS_LIMIT {
            return Err(UcError::MassDrift {
                t,
                deviation: total - total0,
            });
        }
        let tail = next[len].max(0.0);
        if tail > cfg.leak_threshold {
            return Err(UcError::LeakExceeded {
                tail_mass: tail,
                threshold: cfg.leak_threshold,
            });
        }

        let change = l1_distance(&next[..len], &y[..len]);
        let state = Distribution::from_parts(next[..len].to_vec(), tail);
        recorder.record(t, state)?;
        y = next;
        t_prev = t;
        if change < cfg.stop_tol {
            converged = true;
            break;
        }
    }
    Ok(Trajectory {
        samples: recorder.samples,
        clipped_mass,
        converged,
    })
}

/// One RK4 step; the result is left in `out`.
fn rk4_step(field: &FlowField<'_>, y: &[f64], h: f64, k: &mut [Vec<f64>; 4], out: &mut [f64]) {
    let n = y.len();
    field.eval(y, &mut k[0]);
    for i in 0..n {
        out[i] = y[i] + 0.5 * h * k[0][i];
    }
    field.eval(out, &mut k[1]);
    for i in 0..n {
        out[i] = y[i] + 0.5 * h * k[1][i];
    }
    field.eval(out, &mut k[2]);
    for i in 0..n {
        out[i] = y[i] + h * k[2][i];
    }
    field.eval(out, &mut k[3]);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

/// One sample of a coefficient-space run.
#[derive(Debug, Clone)]
pub struct CoeffSample {
    pub t: f64,
    pub coeffs: CoeffVector,
    /// `d(a(t), (1, alpha, alpha^2, ...))`.
    pub distance: f64,
}

fn coeff_sample(t: f64, coeffs: CoeffVector, reference: &CoeffVector) -> Result<CoeffSample> {
    if let Some(k) = coeffs.values().iter().position(|v| !v.is_finite()) {
        return Err(UcError::Overflow { k });
    }
    let distance = coeffs.weighted_metric(reference)?;
    Ok(CoeffSample { t, coeffs, distance })
}

fn geometric_reference(a0: &CoeffVector) -> Result<CoeffVector> {
    CoeffVector::geometric(a0.alpha(), a0.k_max()).with_params(a0.delta(), a0.gamma())
}

/// Iterates the induced recombinator `a -> R a` for `steps` generations.
pub fn coeff_evolve_discrete(a0: &CoeffVector, steps: usize) -> Result<Vec<CoeffSample>> {
    let reference = geometric_reference(a0)?;
    let mut samples = vec![coeff_sample(0.0, a0.clone(), &reference)?];
    let mut current = a0.clone();
    for step in 1..=steps {
        current = current.induced_recombinator();
        samples.push(coeff_sample(step as f64, current.clone(), &reference)?);
    }
    Ok(samples)
}

/// Integrates `da/dt = R a - a` with RK4. The metric parameters of `a0`
/// are used throughout.
pub fn coeff_evolve_continuous(a0: &CoeffVector, t_end: f64, dt: f64) -> Result<Vec<CoeffSample>> {
    if !(dt > 0.0 && dt <= 1.0) || !(t_end > 0.0) {
        return Err(UcError::InvalidParameter(format!(
            "need 0 < dt <= 1 and t_end > 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let reference = geometric_reference(a0)?;
    let (delta, gamma) = (a0.delta(), a0.gamma());
    let field = |a: &[f64]| -> Vec<f64> {
        (0..a.len())
            .map(|k| {
                let conv: f64 = (0..=k).map(|n| a[n] * a[k - n]).sum();
                conv / (k + 1) as f64 - a[k]
            })
            .collect()
    };
    let mut samples = vec![coeff_sample(0.0, a0.clone(), &reference)?];
    let mut a = a0.values().to_vec();
    let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut t_prev = 0.0;
    for step in 1..=n_steps {
        let t = if step == n_steps { t_end } else { step as f64 * dt };
        let h = t - t_prev;
        let k1 = field(&a);
        let y2: Vec<f64> = a.iter().zip(&k1).map(|(y, k)| y + 0.5 * h * k).collect();
        let k2 = field(&y2);
        let y3: Vec<f64> = a.iter().zip(&k2).map(|(y, k)| y + 0.5 * h * k).collect();
        let k3 = field(&y3);
        let y4: Vec<f64> = a.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
        let k4 = field(&y4);
        for i in 0..a.len() {
            a[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        // a_0 is invariant under the flow; pin it against roundoff
        a[0] = 1.0;
        let coeffs = CoeffVector::new(a.clone(), delta, gamma)?;
        samples.push(coeff_sample(t, coeffs, &reference)?);
        t_prev = t;
    }
    Ok(samples)
}
