//! Shared numerical kernels: quadrature, special functions and dense
//! PSD linear algebra.

pub mod linalg;
pub mod quad;
pub mod special;

pub use linalg::{
    factor_psd, schur_conditional_variance, CovMatrix, JitterPolicy, LinalgError,
    PsdFactorization,
};
pub use quad::{integrate_adaptive, integrate_oscillatory_tail, QuadError, QuadSpec, TailPolicy};
pub use special::{bessel_j, gamma, inv_std_normal_cdf, SpecialError};
