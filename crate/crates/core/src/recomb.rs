//! Quadratic recombinators `R(p)_i = sum_{k,l} T_{i(k+l-i),kl} p_k p_l`.
//!
//! Every variant works on a buffer of length `2L - 1` (copy numbers can
//! double in one event) and truncates back to `0..=N`, booking the overflow
//! as tail mass.

use rayon::prelude::*;

use crate::error::{Result, UcError};
use crate::kernel::KernelQ;
use crate::measure::{Distribution, DEFAULT_LEAK_THRESHOLD, DEFAULT_TRUNCATION};

/// Pairs `k` are handed to workers in fixed blocks so the reduction order,
/// and hence the result, does not depend on the thread count.
const PAIR_BLOCK: usize = 8;

#[derive(Debug, Clone)]
pub enum Variant {
    /// Full kernel with penalty `q`, `O(N^3)` per application.
    General(KernelQ),
    /// `q = 0`: perfect alignments only.
    Internal,
    /// `q = 1`: fragmentation followed by convolution.
    Random,
    /// Uniform split of the `k + l` units.
    Takahata,
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::General(kernel) => format!("general(q={})", kernel.q()),
            Variant::Internal => "internal".into(),
            Variant::Random => "random".into(),
            Variant::Takahata => "takahata".into(),
        }
    }

    /// Penalty parameter, if the variant is a member of the `q` family.
    pub fn q(&self) -> Option<f64> {
        match self {
            Variant::General(kernel) => Some(kernel.q()),
            Variant::Internal => Some(0.0),
            Variant::Random => Some(1.0),
            Variant::Takahata => None,
        }
    }
}

/// Which recombination model a run uses: the UC family with penalty `q`,
/// or Takahata's uniform-split variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Penalty(f64),
    Takahata,
}

impl Model {
    /// Recombinator for this model, using the closed forms at `q = 0, 1`.
    pub fn recombinator(&self) -> Result<RecombinatorSpec> {
        match *self {
            Model::Penalty(q) => RecombinatorSpec::for_q(q),
            Model::Takahata => Ok(RecombinatorSpec::takahata()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Model::Penalty(q) => format!("q={q}"),
            Model::Takahata => "takahata".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecombinatorSpec {
    pub variant: Variant,
    pub truncation: usize,
    pub leak_threshold: f64,
}

impl RecombinatorSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            truncation: DEFAULT_TRUNCATION,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
        }
    }

    /// General kernel, even at `q` in `{0, 1}`.
    pub fn general(q: f64) -> Result<Self> {
        Ok(Self::new(Variant::General(KernelQ::new(q)?)))
    }

    /// Picks the closed-form fast path at `q = 0` and `q = 1`.
    pub fn for_q(q: f64) -> Result<Self> {
        let variant = if q == 0.0 {
            Variant::Internal
        } else if q == 1.0 {
            Variant::Random
        } else {
            Variant::General(KernelQ::new(q)?)
        };
        Ok(Self::new(variant))
    }

    pub fn takahata() -> Self {
        Self::new(Variant::Takahata)
    }

    pub fn with_truncation(mut self, nmax: usize) -> Self {
        self.truncation = nmax;
        self
    }

    pub fn with_leak_threshold(mut self, threshold: f64) -> Self {
        self.leak_threshold = threshold;
        self
    }

    /// One recombination round.
    pub fn apply(&self, p: &Distribution) -> Result<Distribution> {
        let (mut values, leak) = self.apply_raw(p.values());
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let tail_mass = p.tail_mass() + leak;
        if tail_mass > self.leak_threshold {
            return Err(UcError::LeakExceeded {
                tail_mass,
                threshold: self.leak_threshold,
            });
        }
        Ok(Distribution::from_parts(values, tail_mass))
    }

    /// `R(p) / |p|_1` truncated to `0..=N`, together with the truncated mass.
    ///
    /// Dividing by the mass keeps `|out|_1 + leak = |p|_1` when `p` has
    /// already lost mass to truncation. `p` may carry small negative
    /// entries (intermediate integrator stages).
    pub(crate) fn apply_raw(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mass: f64 = p.iter().sum();
        let mut out = match &self.variant {
            Variant::General(kernel) => general_raw(kernel, p),
            Variant::Internal => internal_raw(p),
            Variant::Random => {
                let fragments = fragments_raw(p);
                self_convolution(&fragments)
            }
            Variant::Takahata => takahata_raw(p),
        };
        if mass != 0.0 && mass != 1.0 {
            let inv = 1.0 / mass;
            out.iter_mut().for_each(|v| *v *= inv);
        }
        let leak = truncate(&mut out, self.truncation);
        (out, leak)
    }
}

/// Cuts `values` to `0..=nmax`; returns the removed mass.
fn truncate(values: &mut Vec<f64>, nmax: usize) -> f64 {
    if values.len() <= nmax + 1 {
        return 0.0;
    }
    let leak = values[nmax + 1..].iter().sum();
    values.truncate(nmax + 1);
    leak
}

fn general_raw(kernel: &KernelQ, p: &[f64]) -> Vec<f64> {
    let len = p.len();
    let out_len = 2 * len - 1;
    let blocks: Vec<Vec<f64>> = (0..len)
        .collect::<Vec<_>>()
        .par_chunks(PAIR_BLOCK)
        .map(|ks| {
            let mut partial = vec![0.0; out_len];
            let mut row = Vec::with_capacity(out_len);
            for &k in ks {
                let pk = p[k];
                if pk == 0.0 {
                    continue;
                }
                for (l, &pl) in p.iter().enumerate().skip(k) {
                    if pl == 0.0 {
                        continue;
                    }
                    let pair = if l == k { pk * pl } else { 2.0 * pk * pl };
                    kernel.fill_row(k, l, &mut row);
                    for (slot, t) in partial.iter_mut().zip(&row) {
                        *slot += pair * t;
                    }
                }
            }
            partial
        })
        .collect();
    let mut out = vec![0.0; out_len];
    for partial in &blocks {
        for (o, v) in out.iter_mut().zip(partial) {
            *o += v;
        }
    }
    out
}

/// Internal UC: each pair `(k, l)` spreads `p_k p_l / (1 + |k - l|)` over
/// every copy number between `k` and `l`. Uses a difference array.
fn internal_raw(p: &[f64]) -> Vec<f64> {
    let len = p.len();
    let lo = p.iter().position(|&v| v != 0.0);
    let Some(lo) = lo else {
        return vec![0.0; len];
    };
    let hi = p.iter().rposition(|&v| v != 0.0).unwrap_or(lo);
    let mut diff = vec![0.0; len + 1];
    for k in lo..=hi {
        let pk = p[k];
        if pk == 0.0 {
            continue;
        }
        for l in k..=hi {
            let pl = p[l];
            if pl == 0.0 {
                continue;
            }
            let pair = if l == k { pk * pl } else { 2.0 * pk * pl };
            let w = pair / (1 + l - k) as f64;
            diff[k] += w;
            diff[l + 1] -= w;
        }
    }
    // Neumaier-compensated prefix sum; entries outside [lo, hi] stay exactly zero.
    let mut out = vec![0.0; len];
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in lo..=hi {
        let x = diff[i];
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out[i] = sum + comp;
    }
    out
}

/// `pi_k = sum_{l >= k} p_l / (l + 1)` as a suffix sum.
fn fragments_raw(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    let mut acc = 0.0;
    for k in (0..p.len()).rev() {
        acc += p[k] / (k + 1) as f64;
        out[k] = acc;
    }
    out
}

/// Direct `O(L^2)` discrete convolution `a * a`.
fn self_convolution(a: &[f64]) -> Vec<f64> {
    let len = a.len();
    let mut out = vec![0.0; 2 * len - 1];
    for (k, &ak) in a.iter().enumerate() {
        if ak == 0.0 {
            continue;
        }
        for (l, &al) in a.iter().enumerate() {
            out[k + l] += ak * al;
        }
    }
    out
}

fn takahata_raw(p: &[f64]) -> Vec<f64> {
    // Distribution of k + l, then a uniform split of every total.
    let totals = self_convolution(p);
    let mut out = vec![0.0; totals.len()];
    let mut acc = 0.0;
    for n in (0..totals.len()).rev() {
        acc += totals[n] / (n + 1) as f64;
        out[n] = acc;
    }
    out
}

/// Applies the general kernel with the default truncation.
pub fn apply_general(kernel: &KernelQ, p: &Distribution) -> Result<Distribution> {
    RecombinatorSpec::new(Variant::General(kernel.clone())).apply(p)
}

/// Internal UC. Never leaks: the support cannot leave `[min, max]`.
pub fn apply_internal(p: &Distribution) -> Distribution {
    let (mut values, _) = RecombinatorSpec::new(Variant::Internal)
        .with_truncation(p.len())
        .apply_raw(p.values());
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    Distribution::from_parts(values, p.tail_mass())
}

/// Uniform fragmentation: a sequence of length `l` is cut at one of its
/// `l + 1` gaps and the left piece is kept.
pub fn fragment_measure(p: &Distribution) -> Distribution {
    Distribution::from_parts(fragments_raw(p.values()), p.tail_mass())
}

/// Random UC as the self-convolution of the fragment measure.
pub fn apply_random(p: &Distribution) -> Result<Distribution> {
    RecombinatorSpec::new(Variant::Random).apply(p)
}

pub fn apply_takahata(p: &Distribution) -> Result<Distribution> {
    RecombinatorSpec::takahata().apply(p)
}
