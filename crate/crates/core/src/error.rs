use thiserror::Error;

use crate::fixpoint::FixedPointResult;

pub type Result<T> = std::result::Result<T, UcError>;

#[derive(Debug, Error)]
pub enum UcError {
    #[error("negative probability mass {value:e} at k = {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("distribution is not normalized: total mass {sum}")]
    NotNormalized { sum: f64 },

    #[error("truncation leak {tail_mass:e} exceeds threshold {threshold:e}")]
    LeakExceeded { tail_mass: f64, threshold: f64 },

    #[error("binomial accumulation overflowed at k = {k}; reduce K or the support")]
    Overflow { k: usize },

    #[error("coefficient inversion diverges at k = {k}")]
    DivergentInversion { k: usize },

    #[error("coefficient vectors carry different metric parameters")]
    ParamMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("positivity lost at t = {t}: p[{index}] = {value:e}")]
    PositivityLost { t: f64, index: usize, value: f64 },

    #[error("mass drifted by {deviation:e} at t = {t}")]
    MassDrift { t: f64, deviation: f64 },

    #[error("mean {m} outside the truncation window 0..={nmax}")]
    MeanOutOfRange { m: f64, nmax: usize },

    #[error("truncation at N = {nmax} discards {tail:e} of the mass")]
    TruncationTooSmall { nmax: usize, tail: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("fixed-point iteration did not converge within {iterations} iterations (residual {:e})", best.residual)]
    NotConverged {
        iterations: usize,
        best: Box<FixedPointResult>,
    },
}

impl UcError {
    /// True for failures of the numerics, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            UcError::LeakExceeded { .. }
                | UcError::Overflow { .. }
                | UcError::DivergentInversion { .. }
                | UcError::PositivityLost { .. }
                | UcError::MassDrift { .. }
                | UcError::NotConverged { .. }
        )
    }
}
