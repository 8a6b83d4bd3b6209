//! Direct covariance engine for k = 1.
//!
//! The fundamental solution in one dimension is the light-cone indicator
//! G(t, x) = (1/2) 1{|x| < t}, so the covariance collapses to a single time
//! integral of a rectangle integral of the noise kernel, evaluated in closed
//! form for each time slice.

use super::{FieldError, FieldSpec, SpacetimePoint};
use crate::numerics::{integrate_adaptive, QuadSpec};

fn quad_spec() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_subdivisions: 5000,
    }
}

/// Second antiderivative of the Riesz kernel: Phi''(u) = |u|^{-beta}.
#[inline]
fn phi(u: f64, beta: f64) -> f64 {
    u.abs().powf(2.0 - beta) / ((1.0 - beta) * (2.0 - beta))
}

/// Cov(u(t,x), u(s,y)) for k = 1, via the direct light-cone representation.
pub fn covariance_direct_k1(
    spec: &FieldSpec,
    p: &SpacetimePoint,
    q: &SpacetimePoint,
) -> Result<f64, FieldError> {
    if spec.k() != 1 {
        return Err(FieldError::RequiresK1 { k: spec.k() });
    }
    let (t, x) = (p.t, p.x()[0]);
    let (s, y) = (q.t, q.x()[0]);
    let m = t.min(s);
    if m <= 0.0 {
        return Ok(0.0);
    }
    let beta = spec.beta();

    let value = if spec.is_white_noise() {
        // overlap length of the two light-cone slices: both edges move at
        // unit speed, so it is max(0, l0 - 2r) and integrates in closed form
        let l0 = (x + t).min(y + s) - (x - t).max(y - s);
        if l0 <= 0.0 {
            0.0
        } else {
            let upper = m.min(0.5 * l0);
            l0 * upper - upper * upper
        }
    } else {
        // rectangle integral of |u - v|^{-beta} over the two slices
        integrate_adaptive(
            |r| {
                let a1 = x - (t - r);
                let b1 = x + (t - r);
                let c1 = y - (s - r);
                let d1 = y + (s - r);
                phi(b1 - c1, beta) - phi(a1 - c1, beta) - phi(b1 - d1, beta)
                    + phi(a1 - d1, beta)
            },
            0.0,
            m,
            &quad_spec(),
        )?
    };
    Ok(0.25 * value)
}
