//! 1-D adaptive Gauss-Kronrod quadrature and oscillatory-tail integration.

use thiserror::Error;

/// 15-point Kronrod abscissae on [-1, 1] (positive half, descending).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// 7-point Gauss weights for the embedded rule (odd Kronrod nodes).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("quadrature did not converge after {subdivisions} subdivisions (best estimate {best_estimate}, error bound {error_bound})")]
    NonConvergence {
        best_estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },
    #[error("integrand returned NaN at abscissa {abscissa}")]
    NanIntegrand { abscissa: f64 },
    #[error("tail envelope exponent {exponent} is not integrable (need exponent < -1)")]
    NonIntegrableEnvelope { exponent: f64 },
    #[error("oscillatory tail did not reach the target bound after {panels} panels (partial sum {partial_sum}, remainder bound {remainder_bound})")]
    TailNonConvergence {
        partial_sum: f64,
        remainder_bound: f64,
        panels: usize,
    },
    #[error("invalid integration interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

/// Tolerances and budget for the adaptive rule.
#[derive(Debug, Clone)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_subdivisions: 2000,
        }
    }
}

impl QuadSpec {
    pub fn with_tols(abs_tol: f64, rel_tol: f64) -> Self {
        QuadSpec {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Describes the tail of an oscillatory integrand on `[R, oo)`:
/// `|f(rho)| <= envelope_constant * rho^envelope_exponent`, with panels cut
/// at the nodes of the trigonometric factor of frequency `frequency`.
///
/// `single_frequency` marks integrands of the form `g(rho) * trig(frequency * rho)`
/// with `g` of one sign and decreasing envelope; for those the panel sums
/// alternate and the remainder is bounded by the last panel.
///
/// `node_offset` is the phase of the trigonometric factor's zeros: panels are
/// cut at `rho = (node_offset + n*pi) / frequency` (0 for sin, pi/2 for cos).
/// The alternating-remainder bound is only valid when panels run between
/// consecutive zeros, so the offset must match the trig factor.
#[derive(Debug, Clone)]
pub struct TailPolicy {
    pub envelope_constant: f64,
    pub envelope_exponent: f64,
    pub frequency: f64,
    pub node_offset: f64,
    pub single_frequency: bool,
}

/// One Gauss-Kronrod pass over [a, b]: returns (kronrod, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    let mut res_abs = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (lo, hi) = (center - half * x, center + half * x);
        let flo = f(lo);
        if flo.is_nan() {
            return Err(QuadError::NanIntegrand { abscissa: lo });
        }
        let pair = if x == 0.0 {
            flo
        } else {
            let fhi = f(hi);
            if fhi.is_nan() {
                return Err(QuadError::NanIntegrand { abscissa: hi });
            }
            flo + fhi
        };
        kronrod += wk * pair;
        res_abs += wk * pair.abs();
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    kronrod *= half;
    gauss *= half;
    res_abs *= half.abs();

    // Scaled error estimate in the QUADPACK style.
    let mut err = (kronrod - gauss).abs();
    if res_abs != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_abs).powf(1.5);
        if scale < 1.0 {
            err = res_abs * scale;
        }
    }
    Ok((kronrod, err))
}

/// Adaptive bisection Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Handles integrable endpoint singularities milder than `u^-1` by repeated
/// bisection toward the endpoint. Deterministic for fixed inputs.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadError::BadInterval { a, b });
    }

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }

    let (value, err) = gk15(&f, a, b)?;
    let mut panels = vec![Panel { a, b, value, err }];
    let mut total = value;
    let mut total_err = err;

    for _ in 0..spec.max_subdivisions {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        // Split the panel with the largest error estimate.
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, value, err } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval exhausted at machine precision; keep its estimate.
            panels.push(Panel { a, b, value, err: 0.0 });
            total_err -= err;
            continue;
        }
        let (v1, e1) = gk15(&f, a, mid)?;
        let (v2, e2) = gk15(&f, mid, b)?;
        total += v1 + v2 - value;
        total_err += e1 + e2 - err;
        panels.push(Panel { a, b: mid, value: v1, err: e1 });
        panels.push(Panel { a: mid, b, value: v2, err: e2 });
    }

    let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
    if total_err <= tol {
        Ok(total)
    } else {
        Err(QuadError::NonConvergence {
            best_estimate: total,
            error_bound: total_err,
            subdivisions: spec.max_subdivisions,
        })
    }
}

/// Integrates `f` over `[r0, oo)` panel-by-panel between successive nodes of
/// the oscillation, stopping once an analytic bound on the remainder drops
/// below `spec.abs_tol`.
///
/// The remainder bound is the envelope integral
/// `c * rho^(p+1) / |p+1|`; for single-frequency integrands the alternating
/// panel sums give the sharper bound `|last panel|`.
pub fn integrate_oscillatory_tail<F: Fn(f64) -> f64>(
    f: F,
    r0: f64,
    spec: &QuadSpec,
    tail: &TailPolicy,
) -> Result<f64, QuadError> {
    if tail.envelope_exponent >= -1.0 {
        return Err(QuadError::NonIntegrableEnvelope {
            exponent: tail.envelope_exponent,
        });
    }
    let p = tail.envelope_exponent;
    let c = tail.envelope_constant;

    let envelope_bound = |r: f64| c * r.powf(p + 1.0) / (p + 1.0).abs();

    // No oscillation: pure envelope cutoff.
    if tail.frequency <= 0.0 {
        let mut r_end = r0.max(1.0);
        while envelope_bound(r_end) > spec.abs_tol {
            r_end *= 2.0;
            if r_end > 1e300 {
                return Err(QuadError::NonIntegrableEnvelope { exponent: p });
            }
        }
        return integrate_adaptive(f, r0, r_end, spec);
    }

    // Each panel is itself integrated adaptively: when the frequency is small
    // the first panels are wide relative to the envelope's variation and a
    // single GK pass is not enough.
    let panel_spec = QuadSpec {
        abs_tol: (0.05 * spec.abs_tol).max(1e-16),
        rel_tol: 1e-12,
        max_subdivisions: 500,
    };
    let node = |n: i64| (tail.node_offset + n as f64 * std::f64::consts::PI) / tail.frequency;
    let mut lo = r0;
    // First zero of the trigonometric factor strictly beyond r0: panels run
    // between consecutive sign changes.
    let mut node_index =
        ((r0 * tail.frequency - tail.node_offset) / std::f64::consts::PI).floor() as i64 + 1;
    while node(node_index) <= r0 {
        node_index += 1;
    }
    let mut sum = 0.0;
    let mut prev_panel: Option<f64> = None;

    for panel_count in 0..spec.max_subdivisions {
        let hi = node(node_index);
        let value = integrate_adaptive(&f, lo, hi, &panel_spec)?;
        sum += value;

        let crude = envelope_bound(hi);
        let alternating = match prev_panel {
            Some(prev)
                if tail.single_frequency
                    && prev * value <= 0.0
                    && value.abs() <= prev.abs() =>
            {
                value.abs()
            }
            _ => f64::INFINITY,
        };
        let remainder = crude.min(alternating);
        if remainder <= spec.abs_tol {
            return Ok(sum);
        }
        if panel_count + 1 == spec.max_subdivisions {
            return Err(QuadError::TailNonConvergence {
                partial_sum: sum,
                remainder_bound: remainder,
                panels: panel_count + 1,
            });
        }
        prev_panel = Some(value);
        lo = hi;
        node_index += 1;
    }
    unreachable!()
}
