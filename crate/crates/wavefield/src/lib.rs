//! Exact simulation and sample-path diagnostics for the linear stochastic
//! wave equation driven by Riesz-kernel (or space-time white) Gaussian noise.
//!
//! The solution is a centered Gaussian random field indexed by space-time
//! points; this crate computes its covariance through two independent
//! engines, samples it exactly on finite point sets, and runs the local
//! nondeterminism and modulus-of-continuity experiments.

pub mod field;
pub mod lnd;
pub mod modulus;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod sampler;

pub use field::{
    gamma_modulus, riesz_spectral_constant, CovarianceEngine, DomainBox, FieldError, FieldSpec,
    SpacetimePoint,
};
