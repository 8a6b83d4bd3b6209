//! Strong local nondeterminism checks.
//!
//! Verifies numerically that the conditional variance of u(t, x) given nearby
//! field values dominates the sphere integral
//!
//! ```text
//! Int_{S^{k-1}} min_j |(t - t_j) + (x - x_j) . w|^{2 - beta} dw
//! ```
//!
//! by scanning random configurations and reporting the empirical ratio floor.
//! The proposition only asserts that a positive constant exists, so the
//! testable claims are positivity and seed-stability of that floor.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{CovarianceEngine, DomainBox, FieldError, SpacetimePoint};
use crate::numerics::{schur_conditional_variance, CovMatrix, JitterPolicy, LinalgError};
use crate::rng;
use crate::sampler::{assemble_with_engine, SamplerError};

/// Coincidence threshold: conditioning points closer than this (l1) to the
/// target are resampled, since the proposition does not constrain 0/0 ratios.
pub const COINCIDENCE_L1: f64 = 1e-9;
/// Degenerate-trial threshold for both the bound and the variance.
const DEGENERATE: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum LndError {
    #[error("conditioning set is empty")]
    EmptyConditioning,
    #[error("sphere rule resolution {nodes} is below the minimum {minimum} for k={k}")]
    RuleTooCoarse {
        nodes: usize,
        minimum: usize,
        k: usize,
    },
    #[error("operation requires k=1, got k={k}")]
    RequiresK1 { k: usize },
    #[error("n_conditioning {n} exceeds the maximum 8")]
    TooManyConditioning { n: usize },
    #[error("dyadic level {n} needs {points} points, over the sampler budget")]
    LevelTooDeep { n: usize, points: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Quadrature rule for the unit sphere S^{k-1}.
///
/// The min-integrand is only Lipschitz, so equal-weight rules are the right
/// tool: exact two-point measure for k=1, periodic trapezoid for k=2, a
/// Fibonacci lattice for k=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereRule {
    TwoPoint,
    Angles(usize),
    Fibonacci(usize),
}

impl SphereRule {
    pub fn default_for(k: usize) -> Self {
        match k {
            1 => SphereRule::TwoPoint,
            2 => SphereRule::Angles(512),
            _ => SphereRule::Fibonacci(1024),
        }
    }

    fn validate(&self, k: usize) -> Result<(), LndError> {
        match (self, k) {
            (SphereRule::TwoPoint, 1) => Ok(()),
            (SphereRule::Angles(n), 2) if *n >= 16 => Ok(()),
            (SphereRule::Angles(n), 2) => Err(LndError::RuleTooCoarse {
                nodes: *n,
                minimum: 16,
                k,
            }),
            (SphereRule::Fibonacci(n), 3) if *n >= 64 => Ok(()),
            (SphereRule::Fibonacci(n), 3) => Err(LndError::RuleTooCoarse {
                nodes: *n,
                minimum: 64,
                k,
            }),
            _ => Err(LndError::RuleTooCoarse {
                nodes: 0,
                minimum: 1,
                k,
            }),
        }
    }
}

/// The sphere integral of Eq (SLND) with the min over conditioning points.
pub fn slnd_integral(
    target: &SpacetimePoint,
    cond: &[SpacetimePoint],
    beta: f64,
    rule: &SphereRule,
) -> Result<f64, LndError> {
    if cond.is_empty() {
        return Err(LndError::EmptyConditioning);
    }
    let k = target.k();
    rule.validate(k)?;
    let p = 2.0 - beta;

    let min_at = |w: &[f64]| -> f64 {
        cond.iter()
            .map(|c| {
                let mut v = target.t - c.t;
                for (i, wi) in w.iter().enumerate() {
                    v += (target.x()[i] - c.x()[i]) * wi;
                }
                v.abs().powf(p)
            })
            .fold(f64::INFINITY, f64::min)
    };

    Ok(match *rule {
        SphereRule::TwoPoint => min_at(&[1.0]) + min_at(&[-1.0]),
        SphereRule::Angles(n) => {
            let w = 2.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|i| {
                    let th = w * i as f64;
                    min_at(&[th.cos(), th.sin()])
                })
                .sum::<f64>()
                * w
        }
        SphereRule::Fibonacci(n) => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let w = 4.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    min_at(&[r * phi.cos(), r * phi.sin(), z])
                })
                .sum::<f64>()
                * w
        }
    })
}

/// Var(u(target) | u at cond points): Schur residual of the (1+n)x(1+n)
/// covariance matrix. Conditioning points are deduplicated by exact
/// coordinate equality first.
pub fn conditional_variance_points(
    engine: &CovarianceEngine,
    target: &SpacetimePoint,
    cond: &[SpacetimePoint],
) -> Result<f64, LndError> {
    let mut seen = std::collections::HashSet::new();
    let mut points = vec![*target];
    for c in cond {
        let mut key = vec![c.t.to_bits()];
        key.extend(c.x().iter().map(|v| v.to_bits()));
        if seen.insert(key) {
            points.push(*c);
        }
    }
    if points.len() == 1 {
        return Err(LndError::EmptyConditioning);
    }
    let cov: CovMatrix = assemble_with_engine(engine, &points)?;
    Ok(schur_conditional_variance(&cov, &JitterPolicy::default())?)
}

/// Scan configuration; `delta` defaults to a/2, the value the proof of the
/// proposition constructs.
#[derive(Debug, Clone)]
pub struct LndConfig {
    pub domain: DomainBox,
    pub delta: f64,
    pub n_conditioning: usize,
    pub rule: SphereRule,
    pub trials: usize,
    pub seed: u64,
}

impl LndConfig {
    pub fn new(domain: DomainBox, k: usize) -> Self {
        LndConfig {
            domain,
            delta: domain.a / 2.0,
            n_conditioning: 4,
            rule: SphereRule::default_for(k),
            trials: 200,
            seed: 0,
        }
    }

    fn validate(&self, k: usize) -> Result<(), LndError> {
        if self.n_conditioning == 0 || self.trials == 0 {
            return Err(LndError::EmptyConditioning);
        }
        if self.n_conditioning > 8 {
            return Err(LndError::TooManyConditioning {
                n: self.n_conditioning,
            });
        }
        self.rule.validate(k)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TrialRecord {
    pub target: SpacetimePoint,
    pub cond: Vec<SpacetimePoint>,
    pub conditional_variance: f64,
    pub bound: f64,
    pub ratio: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LndReport {
    pub trials: Vec<TrialRecord>,
    pub min_ratio: f64,
    pub min_ratio_trial: usize,
    pub ratio_quartiles: [f64; 3],
    pub n_skipped: usize,
    pub seed: u64,
}

fn quartiles(sorted: &[f64]) -> [f64; 3] {
    let q = |f: f64| -> f64 {
        if sorted.is_empty() {
            return f64::NAN;
        }
        let pos = f * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    [q(0.25), q(0.5), q(0.75)]
}

/// Draws a conditioning point uniformly in the l1 ball of radius delta around
/// `target`, intersected with the domain, excluding near-coincidence.
fn draw_near(
    target: &SpacetimePoint,
    domain: &DomainBox,
    delta: f64,
    k: usize,
    stream: &mut rand_chacha::ChaCha12Rng,
) -> SpacetimePoint {
    loop {
        let t = target.t + rng::uniform_in(stream, -delta, delta);
        let mut x = [0.0f64; 3];
        for (i, slot) in x.iter_mut().enumerate().take(k) {
            *slot = target.x()[i] + rng::uniform_in(stream, -delta, delta);
        }
        let Ok(p) = SpacetimePoint::new(t.max(0.0), &x[..k]) else {
            continue;
        };
        let l1 = target.l1_distance(&p);
        if l1 <= delta && l1 >= COINCIDENCE_L1 && domain.contains(&p) {
            return p;
        }
    }
}

fn scan_with_bound<B>(
    engine: &CovarianceEngine,
    config: &LndConfig,
    bound: B,
) -> Result<LndReport, LndError>
where
    B: Fn(&SpacetimePoint, &[SpacetimePoint]) -> Result<f64, LndError> + Sync,
{
    let k = engine.spec().k();
    config.validate(k)?;
    let trials: Vec<TrialRecord> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| -> Result<TrialRecord, LndError> {
            let mut stream = rng::substream(config.seed, i);
            let target = config.domain.sample(k, &mut stream);
            let cond: Vec<SpacetimePoint> = (0..config.n_conditioning)
                .map(|_| draw_near(&target, &config.domain, config.delta, k, &mut stream))
                .collect();
            let cv = conditional_variance_points(engine, &target, &cond)?;
            let b = bound(&target, &cond)?;
            let skipped = b < DEGENERATE && cv < DEGENERATE;
            let ratio = if skipped { f64::NAN } else { cv / b };
            Ok(TrialRecord {
                target,
                cond,
                conditional_variance: cv,
                bound: b,
                ratio,
                skipped,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut ratios: Vec<(usize, f64)> = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.skipped)
        .map(|(i, t)| (i, t.ratio))
        .collect();
    ratios.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (min_ratio_trial, min_ratio) = *ratios.first().unwrap_or(&(0, f64::NAN));
    let sorted: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    let n_skipped = trials.iter().filter(|t| t.skipped).count();
    Ok(LndReport {
        trials,
        min_ratio,
        min_ratio_trial,
        ratio_quartiles: quartiles(&sorted),
        n_skipped,
        seed: config.seed,
    })
}

/// Random-configuration scan of conditional variance against the sphere
/// integral.
pub fn slnd_ratio_scan(
    engine: &CovarianceEngine,
    config: &LndConfig,
) -> Result<LndReport, LndError> {
    let beta = engine.spec().beta();
    let rule = config.rule;
    scan_with_bound(engine, config, move |target, cond| {
        slnd_integral(target, cond, beta, &rule)
    })
}

/// k = 1 sectorial form: the sphere measure is supported on {-1, 1}, so the
/// bound is min_j |dt + dx|^{2-beta} + min_j |dt - dx|^{2-beta}.
pub fn sectorial_check_k1(
    engine: &CovarianceEngine,
    config: &LndConfig,
) -> Result<LndReport, LndError> {
    let k = engine.spec().k();
    if k != 1 {
        return Err(LndError::RequiresK1 { k });
    }
    let beta = engine.spec().beta();
    scan_with_bound(engine, config, move |target, cond| {
        slnd_integral(target, cond, beta, &SphereRule::TwoPoint)
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LevelRecord {
    pub n: usize,
    pub conditional_variance: f64,
    pub epsilon_sq: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProofGridReport {
    pub levels: Vec<LevelRecord>,
    pub delta_prime: f64,
    pub c2: f64,
}

/// Dyadic-grid conditional-variance check modeled on the proof's Eq (Cvar):
/// on the diagonal grid t^{n,i} = a + i 2^{-n} delta', x^{n,i}_j = -b +
/// i 2^{-n} delta', the variance of the last point given all earlier ones is
/// compared with eps_n^2 = C2 ((1+k) delta')^{2-beta} 2^{-(2-beta)n}.
pub fn proof_grid_conditional_check(
    engine: &CovarianceEngine,
    domain: &DomainBox,
    n_levels: usize,
    c2: f64,
) -> Result<ProofGridReport, LndError> {
    let k = engine.spec().k();
    let beta = engine.spec().beta();
    let delta = domain.a / 2.0;
    let delta_prime = (delta / (1.0 + (k as f64).sqrt()))
        .min(domain.a_prime - domain.a)
        .min(2.0 * domain.b);

    let mut levels = Vec::with_capacity(n_levels + 1);
    for n in 0..=n_levels {
        let count = (1usize << n) + 1;
        if count > crate::sampler::GRID_BUDGET {
            return Err(LndError::LevelTooDeep { n, points: count });
        }
        let step = delta_prime / (1u64 << n) as f64;
        let grid: Vec<SpacetimePoint> = (0..count)
            .map(|i| {
                let t = domain.a + i as f64 * step;
                let x = [-domain.b + i as f64 * step; 3];
                SpacetimePoint::new(t, &x[..k]).expect("grid point in domain")
            })
            .collect();
        let (target, cond) = grid.split_last().expect("non-empty grid");
        let cv = conditional_variance_points(engine, target, cond)?;
        let eps_sq =
            c2 * ((1.0 + k as f64) * delta_prime).powf(2.0 - beta) * 2.0f64.powf(-(2.0 - beta) * n as f64);
        levels.push(LevelRecord {
            n,
            conditional_variance: cv,
            epsilon_sq: eps_sq,
            ratio: cv / eps_sq,
        });
    }
    Ok(ProofGridReport {
        levels,
        delta_prime,
        c2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn engine(k: usize, beta: f64) -> CovarianceEngine {
        CovarianceEngine::new(FieldSpec::new(k, beta).unwrap())
    }

    #[test]
    fn k1_single_point_closed_form() {
        let target = SpacetimePoint::new1(1.3, 0.2);
        let cond = [SpacetimePoint::new1(1.1, 0.5)];
        let beta = 0.7;
        let got = slnd_integral(&target, &cond, beta, &SphereRule::TwoPoint).unwrap();
        let (dt, dx) = (0.2f64, -0.3f64);
        let expect = (dt + dx).abs().powf(2.0 - beta) + (dt - dx).abs().powf(2.0 - beta);
        assert_relative_eq!(got, expect, epsilon = 1e-14);
    }

    #[test]
    fn target_in_conditioning_set_gives_zero() {
        let target = SpacetimePoint::new1(1.3, 0.2);
        let cond = [SpacetimePoint::new1(1.1, 0.5), target];
        let got = slnd_integral(&target, &cond, 0.5, &SphereRule::TwoPoint).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn constant_integrand_total_weights() {
        // dt = 1, dx = 0: integrand is 1 everywhere on the sphere
        let t2 = SpacetimePoint::new(2.0, &[0.0, 0.0]).unwrap();
        let c2 = [SpacetimePoint::new(1.0, &[0.0, 0.0]).unwrap()];
        let got2 = slnd_integral(&t2, &c2, 1.0, &SphereRule::Angles(512)).unwrap();
        assert_relative_eq!(got2, 2.0 * PI, epsilon = 1e-12);

        let t3 = SpacetimePoint::new(2.0, &[0.0, 0.0, 0.0]).unwrap();
        let c3 = [SpacetimePoint::new(1.0, &[0.0, 0.0, 0.0]).unwrap()];
        let got3 = slnd_integral(&t3, &c3, 1.5, &SphereRule::Fibonacci(1024)).unwrap();
        assert_relative_eq!(got3, 4.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn empty_or_coarse_rules_rejected() {
        let target = SpacetimePoint::new1(1.0, 0.0);
        assert!(matches!(
            slnd_integral(&target, &[], 0.5, &SphereRule::TwoPoint),
            Err(LndError::EmptyConditioning)
        ));
        let t2 = SpacetimePoint::new(1.0, &[0.0, 0.0]).unwrap();
        let c = [SpacetimePoint::new(1.2, &[0.1, 0.0]).unwrap()];
        assert!(matches!(
            slnd_integral(&t2, &c, 0.5, &SphereRule::Angles(8)),
            Err(LndError::RuleTooCoarse { .. })
        ));
    }

    #[test]
    fn permutation_invariance() {
        let target = SpacetimePoint::new(1.5, &[0.1, -0.2]).unwrap();
        let a = SpacetimePoint::new(1.4, &[0.0, 0.0]).unwrap();
        let b = SpacetimePoint::new(1.6, &[0.3, -0.1]).unwrap();
        let c = SpacetimePoint::new(1.45, &[0.2, -0.3]).unwrap();
        let rule = SphereRule::Angles(512);
        let v1 = slnd_integral(&target, &[a, b, c], 0.8, &rule).unwrap();
        let v2 = slnd_integral(&target, &[c, a, b], 0.8, &rule).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn rotation_invariance_within_rule_error() {
        let beta = 0.8;
        let rule = SphereRule::Angles(512);
        let target = SpacetimePoint::new(1.5, &[0.0, 0.0]).unwrap();
        let offsets = [(0.05, 0.12, -0.07), (-0.1, 0.02, 0.9), (0.03, -0.08, 0.04)];
        let cond: Vec<SpacetimePoint> = offsets
            .iter()
            .map(|&(dt, dx, dy)| SpacetimePoint::new(1.5 + dt, &[dx, dy]).unwrap())
            .collect();
        let v = slnd_integral(&target, &cond, beta, &rule).unwrap();
        let th: f64 = 0.83;
        let rot: Vec<SpacetimePoint> = offsets
            .iter()
            .map(|&(dt, dx, dy)| {
                let (rx, ry) = (dx * th.cos() - dy * th.sin(), dx * th.sin() + dy * th.cos());
                SpacetimePoint::new(1.5 + dt, &[rx, ry]).unwrap()
            })
            .collect();
        let vr = slnd_integral(&target, &rot, beta, &rule).unwrap();
        assert!(
            (v - vr).abs() <= 0.01 * v.abs(),
            "rotation changed the integral by more than 1%: {v} vs {vr}"
        );
    }

    #[test]
    fn doubling_sphere_nodes_is_stable() {
        for k in [2usize, 3] {
            let mut stream = rng::substream(31, k as u64);
            for _ in 0..10 {
                let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
                let target = domain.sample(k, &mut stream);
                let cond: Vec<SpacetimePoint> =
                    (0..3).map(|_| draw_near(&target, &domain, 0.5, k, &mut stream)).collect();
                let (lo, hi) = match k {
                    2 => (SphereRule::Angles(512), SphereRule::Angles(1024)),
                    _ => (SphereRule::Fibonacci(1024), SphereRule::Fibonacci(2048)),
                };
                let v1 = slnd_integral(&target, &cond, 0.8, &lo).unwrap();
                let v2 = slnd_integral(&target, &cond, 0.8, &hi).unwrap();
                assert!(
                    (v1 - v2).abs() <= 0.005 * v1.abs().max(v2.abs()),
                    "k={k}: rule doubling moved the integral from {v1} to {v2}"
                );
            }
        }
    }

    #[test]
    fn conditional_variance_on_target_is_zero() {
        let eng = engine(1, 1.0);
        let p = SpacetimePoint::new1(1.2, 0.1);
        let cv = conditional_variance_points(&eng, &p, &[p]).unwrap();
        let var = eng.variance(&p).unwrap();
        assert!(cv <= 1e-9 * var, "cv = {cv}");
        // duplicates of the target dedup to the same outcome
        let cv2 = conditional_variance_points(&eng, &p, &[p, p, p]).unwrap();
        assert!(cv2 <= 1e-9 * var);
    }

    #[test]
    fn schur_two_by_two_hand_value() {
        let eng = engine(1, 1.0);
        let target = SpacetimePoint::new1(1.1, 0.0);
        let cond = [SpacetimePoint::new1(1.0, 0.0)];
        let cv = conditional_variance_points(&eng, &target, &cond).unwrap();
        // 0.3025 - 0.25^2 / 0.25
        assert_relative_eq!(cv, 0.0525, epsilon = 1e-8);
    }

    #[test]
    fn conditioning_is_monotone() {
        let eng = engine(1, 0.5);
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let mut stream = rng::substream(57, 0);
        for _ in 0..10 {
            let target = domain.sample(1, &mut stream);
            let cond: Vec<SpacetimePoint> =
                (0..4).map(|_| draw_near(&target, &domain, 0.5, 1, &mut stream)).collect();
            let mut prev = f64::INFINITY;
            for m in 1..=cond.len() {
                let cv = conditional_variance_points(&eng, &target, &cond[..m]).unwrap();
                assert!(
                    cv <= prev * (1.0 + 1e-9) + 1e-12,
                    "conditional variance rose from {prev} to {cv} with point {m}"
                );
                prev = cv;
            }
        }
    }

    #[test]
    fn ratio_scan_floor_is_positive_and_deterministic() {
        let eng = engine(1, 1.0);
        let mut config = LndConfig::new(DomainBox::new(1.0, 2.0, 1.0).unwrap(), 1);
        config.trials = 100;
        config.n_conditioning = 4;
        config.seed = 3;
        let report = slnd_ratio_scan(&eng, &config).unwrap();
        assert!(report.min_ratio > 0.0, "min ratio {}", report.min_ratio);
        assert!(report.trials.iter().all(|t| t.skipped || t.ratio >= 0.0));
        let again = slnd_ratio_scan(&eng, &config).unwrap();
        assert_eq!(report.min_ratio, again.min_ratio);
        assert_eq!(report.min_ratio_trial, again.min_ratio_trial);
    }

    #[test]
    fn sectorial_matches_slnd_for_k1() {
        let beta = 0.5;
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let mut stream = rng::substream(71, 0);
        for _ in 0..100 {
            let target = domain.sample(1, &mut stream);
            let cond: Vec<SpacetimePoint> =
                (0..3).map(|_| draw_near(&target, &domain, 0.5, 1, &mut stream)).collect();
            let a = slnd_integral(&target, &cond, beta, &SphereRule::TwoPoint).unwrap();
            // the sectorial bound is definitionally the same two-point formula
            let dtp = |c: &SpacetimePoint| (target.t - c.t) + (target.x()[0] - c.x()[0]);
            let dtm = |c: &SpacetimePoint| (target.t - c.t) - (target.x()[0] - c.x()[0]);
            let manual = cond
                .iter()
                .map(|c| dtp(c).abs().powf(2.0 - beta))
                .fold(f64::INFINITY, f64::min)
                + cond
                    .iter()
                    .map(|c| dtm(c).abs().powf(2.0 - beta))
                    .fold(f64::INFINITY, f64::min);
            assert_relative_eq!(a, manual, epsilon = 1e-14);
        }
    }

    #[test]
    fn sectorial_scan_floor_positive() {
        let eng = engine(1, 0.5);
        let mut config = LndConfig::new(DomainBox::new(1.0, 2.0, 1.0).unwrap(), 1);
        config.trials = 100;
        config.seed = 9;
        let report = sectorial_check_k1(&eng, &config).unwrap();
        assert!(report.min_ratio > 0.0);
        assert!(matches!(
            sectorial_check_k1(&engine(2, 0.5), &config),
            Err(LndError::RequiresK1 { k: 2 })
        ));
    }

    #[test]
    fn characteristic_line_configuration() {
        // conditioning points on the characteristic x - x_j = -(t - t_j):
        // the first bound term vanishes, the second stays of order h^{2-beta}
        let beta = 0.5;
        let eng = engine(1, beta);
        let target = SpacetimePoint::new1(1.5, 0.0);
        let cond: Vec<SpacetimePoint> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&h| SpacetimePoint::new1(1.5 - h, h))
            .collect();
        let bound = slnd_integral(&target, &cond, beta, &SphereRule::TwoPoint).unwrap();
        let expect = (2.0f64 * 0.05).powf(2.0 - beta);
        assert_relative_eq!(bound, expect, epsilon = 1e-12);
        let cv = conditional_variance_points(&eng, &target, &cond).unwrap();
        assert!(cv > 0.0 && cv.is_finite());
        assert!(cv / bound > 0.0);
    }

    #[test]
    fn proof_grid_ratios_positive() {
        let eng = engine(1, 1.0);
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let report = proof_grid_conditional_check(&eng, &domain, 6, 1.0).unwrap();
        assert_eq!(report.levels.len(), 7);
        for level in &report.levels {
            assert!(
                level.ratio > 0.0 && level.ratio.is_finite(),
                "level {}: ratio {}",
                level.n,
                level.ratio
            );
        }
        // level 0 conditions on the single corner point
        assert_eq!(report.levels[0].n, 0);
    }
}
