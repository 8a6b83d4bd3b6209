//! Spectral covariance engine, valid for every admissible (k, beta).
//!
//! After the analytic time integral the covariance reduces to a single radial
//! quadrature
//!
//! ```text
//! Cov = c_{k,beta} * Int_0^oo rho^(beta-3) * T(rho) * A_k(z * rho) d rho
//! T(rho) = (1/2) [ m cos(d rho) - (sin(S rho) - sin(d rho)) / (2 rho) ]
//! ```
//!
//! with m = t /\ s, d = |t - s|, S = t + s, z = |x - y| and angular factor
//! A_1(v) = 2 cos v, A_2(v) = 2 pi J_0(v), A_3(v) = 4 pi sin(v)/v.
//!
//! The integrand is split at rho = 1. On (0, 1] the bracket in T cancels to
//! O(rho^2), so below M*rho = 0.01 it is replaced by its Taylor series before
//! the rho^(beta-3) amplification can destroy the cancellation. On [1, oo)
//! everything is expanded product-to-sum into single-frequency terms
//! coeff * rho^mu * trig(omega * rho), each integrated between trigonometric
//! nodes with an explicit remainder bound; for k = 2 the J_0 factor is handled
//! exactly up to a transition radius and by its Hankel expansion beyond it.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{FieldError, FieldSpec, SpacetimePoint};
use crate::numerics::{
    integrate_adaptive, integrate_oscillatory_tail, QuadError, QuadSpec, TailPolicy,
};

const DEFAULT_ABS_TOL: f64 = 1e-8;
const TAIL_MAX_PANELS: usize = 2_000_000;
/// |J0(v) - hankel_approx(v)| <= HANKEL_ERR * v^(-7/2) for v >= 10
/// (next-order coefficient sqrt(2/pi) * 75/1024 ~ 0.058; validated in tests).
const HANKEL_ERR: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trig {
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug)]
struct TailTerm {
    coeff: f64,
    power: f64,
    freq: f64,
    kind: Trig,
}

#[inline]
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Angular factor A_k(v) of the radial reduction.
#[inline]
fn angular(k: usize, v: f64) -> f64 {
    match k {
        1 => 2.0 * v.cos(),
        2 => 2.0 * PI * libm::j0(v),
        _ => 4.0 * PI * sinc(v),
    }
}

/// trig_a(wa * rho) * trig_b(wb * rho) as two single-frequency terms
/// (coefficient factor, kind, frequency); frequencies may come out negative.
fn trig_product(a: Trig, wa: f64, b: Trig, wb: f64) -> [(f64, Trig, f64); 2] {
    match (a, b) {
        (Trig::Cos, Trig::Cos) => [(0.5, Trig::Cos, wa - wb), (0.5, Trig::Cos, wa + wb)],
        (Trig::Sin, Trig::Sin) => [(0.5, Trig::Cos, wa - wb), (-0.5, Trig::Cos, wa + wb)],
        (Trig::Sin, Trig::Cos) => [(0.5, Trig::Sin, wa + wb), (0.5, Trig::Sin, wa - wb)],
        (Trig::Cos, Trig::Sin) => [(0.5, Trig::Sin, wa + wb), (-0.5, Trig::Sin, wa - wb)],
    }
}

/// Normalizes the frequency sign (cos even, sin odd) and collects the term.
fn push_term(terms: &mut Vec<TailTerm>, coeff: f64, power: f64, freq: f64, kind: Trig) {
    let (coeff, freq) = if freq < 0.0 {
        match kind {
            Trig::Cos => (coeff, -freq),
            Trig::Sin => (-coeff, -freq),
        }
    } else {
        (coeff, freq)
    };
    if coeff != 0.0 {
        terms.push(TailTerm { coeff, power, freq, kind });
    }
}

/// Int_r0^oo coeff * rho^power * trig(freq * rho) d rho to absolute `tol`.
fn eval_tail_term(term: &TailTerm, r0: f64, tol: f64) -> Result<f64, QuadError> {
    if term.freq < 1e-12 {
        // cos(0) = 1 integrates in closed form; sin(0) vanishes
        return Ok(match term.kind {
            Trig::Sin => 0.0,
            Trig::Cos => -term.coeff * r0.powf(term.power + 1.0) / (term.power + 1.0),
        });
    }
    let spec = QuadSpec {
        abs_tol: tol,
        rel_tol: 1e-12,
        max_subdivisions: TAIL_MAX_PANELS,
    };
    let policy = TailPolicy {
        envelope_constant: term.coeff.abs(),
        envelope_exponent: term.power,
        frequency: term.freq,
        node_offset: match term.kind {
            Trig::Sin => 0.0,
            Trig::Cos => FRAC_PI_2,
        },
        single_frequency: true,
    };
    let TailTerm { coeff, power, freq, kind } = *term;
    integrate_oscillatory_tail(
        move |rho: f64| {
            let trig = match kind {
                Trig::Sin => (freq * rho).sin(),
                Trig::Cos => (freq * rho).cos(),
            };
            coeff * rho.powf(power) * trig
        },
        r0,
        &spec,
        &policy,
    )
}

/// The three single-frequency pieces of rho^(beta-3) * T(rho).
fn base_terms(beta: f64, m: f64, d: f64, s_sum: f64) -> [TailTerm; 3] {
    [
        TailTerm { coeff: 0.5 * m, power: beta - 3.0, freq: d, kind: Trig::Cos },
        TailTerm { coeff: -0.25, power: beta - 4.0, freq: s_sum, kind: Trig::Sin },
        TailTerm { coeff: 0.25, power: beta - 4.0, freq: d, kind: Trig::Sin },
    ]
}

/// Marches half-period panels of `f` from `r0` toward `r1`. Returns the sum
/// and whether the *entire* remaining integral (past the stopping point, out
/// to infinity) is already below `tol` by the envelope c * rho^p bound.
fn march_finite<F: Fn(f64) -> f64>(
    f: &F,
    r0: f64,
    r1: f64,
    node_freq: f64,
    env_c: f64,
    env_p: f64,
    tol: f64,
) -> Result<(f64, bool), QuadError> {
    if r1 <= r0 {
        return Ok((0.0, false));
    }
    let panel_spec = QuadSpec {
        abs_tol: (0.05 * tol).max(1e-16),
        rel_tol: 1e-12,
        max_subdivisions: 500,
    };
    let half = PI / node_freq;
    let mut node = (r0 / half).floor() as i64 + 1;
    let mut lo = r0;
    let mut sum = 0.0;
    for panels in 0..TAIL_MAX_PANELS {
        let hi = (node as f64 * half).min(r1);
        if hi > lo {
            sum += integrate_adaptive(f, lo, hi, &panel_spec)?;
        }
        if hi >= r1 {
            return Ok((sum, false));
        }
        if env_c * hi.powf(env_p + 1.0) / (env_p + 1.0).abs() <= tol {
            return Ok((sum, true));
        }
        lo = hi;
        node += 1;
        if panels + 1 == TAIL_MAX_PANELS {
            return Err(QuadError::TailNonConvergence {
                partial_sum: sum,
                remainder_bound: f64::INFINITY,
                panels: TAIL_MAX_PANELS,
            });
        }
    }
    unreachable!()
}

/// Tail for k = 2, z > 0: exact J0 up to a transition radius (chosen so the
/// Hankel truncation error integrates below tolerance), asymptotic
/// single-frequency terms beyond it.
fn tail_k2(beta: f64, c: f64, m: f64, d: f64, s_sum: f64, z: f64, tol: f64) -> Result<f64, QuadError> {
    let base = base_terms(beta, m, d, s_sum);
    let term_tol = tol / base.len() as f64;
    // leading Hankel amplitude: 2 pi J0(z rho) ~ kappa rho^{-1/2} (cos + sin)(z rho)
    let kappa = 2.0 * (PI / z).sqrt();
    let mut sum = 0.0;
    for t in base {
        let coeff = c * t.coeff;
        let mu = t.power;
        // transition radius: integrated Hankel error below half the budget
        let err_c = coeff.abs() * 2.0 * PI * HANKEL_ERR * z.powf(-3.5);
        let r_t = (0.5 * term_tol * (2.5 - mu) / err_c)
            .powf(1.0 / (mu - 2.5))
            .max(10.0 / z)
            .max(1.0);

        let trig = move |rho: f64| match t.kind {
            Trig::Sin => (t.freq * rho).sin(),
            Trig::Cos => (t.freq * rho).cos(),
        };
        let f_exact = |rho: f64| coeff * rho.powf(mu) * trig(rho) * 2.0 * PI * libm::j0(z * rho);
        let (part, done) = march_finite(
            &f_exact,
            1.0,
            r_t,
            t.freq.max(z),
            coeff.abs() * 2.0 * PI,
            mu,
            0.5 * term_tol,
        )?;
        sum += part;
        if done {
            continue;
        }

        // Hankel pieces amp * rho^(mu + dp) * (cc*cos + cs*sin)(z rho)
        let pieces = [
            (kappa, -0.5, 1.0, 1.0),
            (-kappa * 9.0 / (128.0 * z * z), -2.5, 1.0, 1.0),
            (kappa / (8.0 * z), -1.5, -1.0, 1.0),
        ];
        let mut sub = Vec::new();
        for (amp, dp, cc, cs) in pieces {
            for (f, kind, w) in trig_product(t.kind, t.freq, Trig::Cos, z) {
                push_term(&mut sub, coeff * amp * cc * f, mu + dp, w, kind);
            }
            for (f, kind, w) in trig_product(t.kind, t.freq, Trig::Sin, z) {
                push_term(&mut sub, coeff * amp * cs * f, mu + dp, w, kind);
            }
        }
        let sub_tol = 0.5 * term_tol / sub.len() as f64;
        for st in &sub {
            sum += eval_tail_term(st, r_t, sub_tol)?;
        }
    }
    Ok(sum)
}

/// Int_1^oo of the full integrand, split into single-frequency terms.
fn tail_integral(
    k: usize,
    beta: f64,
    c: f64,
    m: f64,
    d: f64,
    s_sum: f64,
    z: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    let base = base_terms(beta, m, d, s_sum);
    let mut terms = Vec::new();
    if z == 0.0 {
        let a0 = angular(k, 0.0);
        for t in base {
            push_term(&mut terms, c * a0 * t.coeff, t.power, t.freq, t.kind);
        }
    } else {
        match k {
            1 => {
                // x 2 cos(z rho)
                for t in base {
                    for (f, kind, w) in trig_product(t.kind, t.freq, Trig::Cos, z) {
                        push_term(&mut terms, 2.0 * c * t.coeff * f, t.power, w, kind);
                    }
                }
            }
            2 => return tail_k2(beta, c, m, d, s_sum, z, tol),
            _ => {
                // x (4 pi / z) rho^{-1} sin(z rho)
                let a = 4.0 * PI / z;
                for t in base {
                    for (f, kind, w) in trig_product(t.kind, t.freq, Trig::Sin, z) {
                        push_term(&mut terms, a * c * t.coeff * f, t.power - 1.0, w, kind);
                    }
                }
            }
        }
    }
    let term_tol = tol / terms.len() as f64;
    let mut sum = 0.0;
    for t in &terms {
        sum += eval_tail_term(t, 1.0, term_tol)?;
    }
    Ok(sum)
}

/// Taylor coefficients b_n of the bracket
/// B(u) = cos(du) - (sin(Su) - sin(du)) / (2mu) = sum_{n>=1} (-1)^n b_n u^{2n},
/// written without the 1/m division:
/// b_n = d^{2n}/(2n)! - (sum_{j=0}^{2n} S^j d^{2n-j}) / (2n+1)!.
fn taylor_coeffs(s_sum: f64, d: f64) -> [f64; 8] {
    let mut b = [0.0; 8];
    let mut fact = 1.0f64; // running (2n)!
    for n in 1..=8usize {
        fact *= ((2 * n - 1) * (2 * n)) as f64;
        let f2n1 = fact * (2 * n + 1) as f64;
        let mut geo = 0.0;
        for j in 0..=2 * n {
            geo += s_sum.powi(j as i32) * d.powi((2 * n - j) as i32);
        }
        b[n - 1] = d.powi(2 * n as i32) / fact - geo / f2n1;
    }
    b
}

pub fn covariance_spectral(
    spec: &FieldSpec,
    p: &SpacetimePoint,
    q: &SpacetimePoint,
) -> Result<f64, FieldError> {
    covariance_spectral_with_tol(spec, p, q, DEFAULT_ABS_TOL)
}

/// Spectral covariance to absolute tolerance `abs_tol`.
pub fn covariance_spectral_with_tol(
    spec: &FieldSpec,
    p: &SpacetimePoint,
    q: &SpacetimePoint,
    abs_tol: f64,
) -> Result<f64, FieldError> {
    let m = p.t.min(q.t);
    if m <= 0.0 {
        return Ok(0.0);
    }
    let big = p.t.max(q.t);
    let d = big - m;
    let s_sum = big + m;
    let mut z = p.spatial_distance(q);
    if z < 1e-8 {
        z = 0.0;
    }
    let k = spec.k();
    let beta = spec.beta();
    let c = spec.norm_const();

    // Near part (0, 1]: series form below the cancellation threshold, direct
    // bracket above it.
    let rho_break = (0.01 / big).min(1.0);
    let b = taylor_coeffs(s_sum, d);
    let near_spec = QuadSpec {
        abs_tol: 0.25 * abs_tol,
        rel_tol: 1e-9,
        max_subdivisions: 50_000,
    };
    let series = |rho: f64| {
        let u2 = rho * rho;
        let mut poly = 0.0;
        let mut upow = 1.0;
        let mut sign = -1.0;
        for bn in b {
            poly += sign * bn * upow;
            upow *= u2;
            sign = -sign;
        }
        c * 0.5 * m * rho.powf(beta - 1.0) * poly * angular(k, z * rho)
    };
    let mut total = integrate_adaptive(series, 0.0, rho_break, &near_spec)
        .map_err(FieldError::from)?;
    if rho_break < 1.0 {
        let direct = |rho: f64| {
            let t_rho = 0.5
                * (m * (d * rho).cos()
                    - ((s_sum * rho).sin() - (d * rho).sin()) / (2.0 * rho));
            c * rho.powf(beta - 3.0) * t_rho * angular(k, z * rho)
        };
        total += integrate_adaptive(direct, rho_break, 1.0, &near_spec)?;
    }

    total += tail_integral(k, beta, c, m, d, s_sum, z, 0.5 * abs_tol)?;
    Ok(total)
}
