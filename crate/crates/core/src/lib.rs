//! Deterministic unequal-crossover (UC) recombination dynamics on copy-number
//! distributions.
//!
//! The crate provides the UC transition kernel with penalty parameter `q`,
//! the induced quadratic recombinators (general, internal `q = 0`, random
//! `q = 1`, and Takahata's uniform variant), discrete and continuous time
//! evolution, closed-form and iterative fixed points, and the size-biased
//! generating-function coefficients on which random UC acts as a contraction.

// `!(x > 0.0)` is the NaN-rejecting form used for parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fixpoint;
pub mod genfunc;
pub mod io;
pub mod kernel;
pub mod measure;
pub mod recomb;
pub mod sample;
pub mod verify;

pub use dynamics::{evolve_continuous, evolve_discrete, rhs, EvolveConfig, Mode, Sample, Trajectory};
pub use error::{Result, UcError};
pub use fixpoint::{
    analytic_internal, analytic_random, analytic_takahata, monotonicity_check, reversibility_residual, solve_numeric,
    FixedPointResult, Provenance,
};
pub use genfunc::{coeffs_from_distribution, distribution_from_coeffs, fixed_coeffs_recursion, CoeffVector};
pub use kernel::{takahata_transition, weight, KernelQ, RowReport};
pub use measure::{tv_distance, Distribution, MomentReport};
pub use recomb::{
    apply_general, apply_internal, apply_random, apply_takahata, fragment_measure, Model, RecombinatorSpec, Variant,
};
