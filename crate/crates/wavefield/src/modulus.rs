//! Uniform modulus of continuity experiment.
//!
//! For grid samples of the field, the statistic
//!
//! ```text
//! J(eps) = max over pairs with 0 < sigma[p,q] <= eps of |u(p) - u(q)| / gamma(sigma[p,q])
//! ```
//!
//! should concentrate on a positive constant K as eps shrinks. The theorem
//! only asserts existence of K, so the experiment reports the median of J at
//! the smallest level together with its dispersion and seed stability.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{
    gamma_modulus, sandwich_scan, CovarianceEngine, DomainBox, FieldError, FieldSpec,
    SandwichRecord, SpacetimePoint,
};
use crate::sampler::{self, sample_field, FieldSample, GridSpec, SamplerError};

/// Point cap for the entropy fine grid. Covering only touches the sigma
/// table, so it can afford more points than the Cholesky-bound sampler.
pub const ENTROPY_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum ModulusError {
    #[error("no pair with 0 < sigma <= {epsilon}; use a denser grid or a larger epsilon")]
    NoQualifyingPair { epsilon: f64 },
    #[error("only {usable} epsilon levels fall in the realized sigma range; need at least 3")]
    TooFewLevels { usable: usize },
    #[error("sandwich constant C2 = {c2} must be positive and finite")]
    BadC2 { c2: f64 },
    #[error("entropy grid has {requested} points, over the cap {limit}")]
    EntropyBudget { requested: usize, limit: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ModulusConfig {
    pub domain: DomainBox,
    pub grid: GridSpec,
    pub n_levels: usize,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyLevel {
    pub epsilon: f64,
    pub n_balls: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyRecord {
    pub levels: Vec<EntropyLevel>,
    pub fitted_exponent: f64,
    pub theory_exponent: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ModulusReport {
    pub epsilon_schedule: Vec<f64>,
    /// j_values[s][n] = J(eps_{n+1}) for realization s.
    pub j_values: Vec<Vec<f64>>,
    pub k_estimate: f64,
    pub k_dispersion: f64,
    pub sandwich: SandwichRecord,
    pub entropy: EntropyRecord,
    pub seed: u64,
}

/// delta' = min{delta / (1 + sqrt k), a' - a, 2b} with delta = a/2; the
/// dyadic mesh parameter of the proof.
pub fn dyadic_delta_prime(k: usize, domain: &DomainBox) -> f64 {
    (0.5 * domain.a / (1.0 + (k as f64).sqrt()))
        .min(domain.a_prime - domain.a)
        .min(2.0 * domain.b)
}

/// eps_n = [C2 ((1+k) delta')^{2-beta} 2^{-(2-beta) n}]^{1/2}, n = 1..n_levels.
pub fn epsilon_schedule(
    spec: &FieldSpec,
    domain: &DomainBox,
    n_levels: usize,
    c2_empirical: f64,
) -> Result<Vec<f64>, ModulusError> {
    if !(c2_empirical > 0.0 && c2_empirical.is_finite()) {
        return Err(ModulusError::BadC2 { c2: c2_empirical });
    }
    let k = spec.k();
    let p = 2.0 - spec.beta();
    let delta_prime = dyadic_delta_prime(k, domain);
    let base = c2_empirical * ((1.0 + k as f64) * delta_prime).powf(p);
    Ok((1..=n_levels)
        .map(|n| (base * 2.0f64.powf(-p * n as f64)).sqrt())
        .collect())
}

/// Pairwise canonical-metric table for a point set.
pub fn sigma_table(
    engine: &CovarianceEngine,
    points: &[SpacetimePoint],
) -> Result<DMatrix<f64>, ModulusError> {
    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| engine.sigma_metric(&points[i], &points[j]))
        .collect::<Result<_, FieldError>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(values.iter()) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// J(epsilon) for every realization in the sample: the max of
/// |du| / gamma(sigma) over unordered pairs with 0 < sigma <= epsilon.
pub fn estimate_j(
    sample: &FieldSample,
    sigma: &DMatrix<f64>,
    epsilon: f64,
) -> Result<Vec<f64>, ModulusError> {
    let n = sample.points.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..i {
            let s = sigma[(i, j)];
            if s > 0.0 && s <= epsilon {
                pairs.push((i, j, gamma_modulus(s)?));
            }
        }
    }
    if pairs.is_empty() {
        return Err(ModulusError::NoQualifyingPair { epsilon });
    }
    Ok((0..sample.values.nrows())
        .into_par_iter()
        .map(|s| {
            pairs
                .iter()
                .map(|&(i, j, g)| (sample.values[(s, i)] - sample.values[(s, j)]).abs() / g)
                .fold(0.0, f64::max)
        })
        .collect())
}

fn quartiles(values: &[f64]) -> [f64; 3] {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |f: f64| -> f64 {
        let pos = f * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    [q(0.25), q(0.5), q(0.75)]
}

/// Greedy covering of `fine_grid` by sigma-balls, one count per epsilon, and
/// the least-squares slope of log N against log(1/eps).
pub fn entropy_scan(
    spec: &FieldSpec,
    fine_grid: &GridSpec,
    epsilons: &[f64],
) -> Result<EntropyRecord, ModulusError> {
    let k = spec.k();
    let total = fine_grid.time_points * fine_grid.space_points_per_axis.pow(k as u32);
    if total > ENTROPY_BUDGET {
        return Err(ModulusError::EntropyBudget {
            requested: total,
            limit: ENTROPY_BUDGET,
        });
    }
    let points = sampler::grid_points(fine_grid, k)?;
    let engine = CovarianceEngine::new(*spec);
    let sigma = sigma_table(&engine, &points)?;
    let n = points.len();
    let (mut sig_min, mut sig_max) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in 0..i {
            let s = sigma[(i, j)];
            if s > 0.0 {
                sig_min = sig_min.min(s);
                sig_max = sig_max.max(s);
            }
        }
    }
    let usable: Vec<f64> = epsilons
        .iter()
        .copied()
        .filter(|&e| e > sig_min && e <= sig_max)
        .collect();
    if usable.len() < 3 {
        return Err(ModulusError::TooFewLevels {
            usable: usable.len(),
        });
    }

    let levels: Vec<EntropyLevel> = usable
        .par_iter()
        .map(|&epsilon| {
            let mut covered = vec![false; n];
            let mut n_balls = 0;
            for c in 0..n {
                if covered[c] {
                    continue;
                }
                n_balls += 1;
                covered[c] = true;
                for (j, slot) in covered.iter_mut().enumerate() {
                    if !*slot && sigma[(c, j)] <= epsilon {
                        *slot = true;
                    }
                }
            }
            EntropyLevel { epsilon, n_balls }
        })
        .collect();

    // least squares of log N on log(1/eps)
    let m = levels.len() as f64;
    let xs: Vec<f64> = levels.iter().map(|l| (1.0 / l.epsilon).ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| (l.n_balls as f64).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();

    Ok(EntropyRecord {
        levels,
        fitted_exponent: sxy / sxx,
        theory_exponent: (1.0 + k as f64) / (2.0 - spec.beta()),
    })
}

/// Full experiment: sandwich constants, the eps schedule they induce, J at
/// every level for every realization, the K estimate, and the entropy record.
pub fn modulus_experiment(
    spec: &FieldSpec,
    config: &ModulusConfig,
) -> Result<ModulusReport, ModulusError> {
    let engine = CovarianceEngine::new(*spec);
    let sandwich = sandwich_scan(
        &engine,
        &config.domain,
        1000,
        0.5 * config.domain.a,
        config.seed,
    )?;
    let schedule = epsilon_schedule(spec, &config.domain, config.n_levels, sandwich.c2)?;
    let points = sampler::build_grid(&config.grid, spec.k())?;
    let sigma = sigma_table(&engine, &points)?;
    let sample = sample_field(spec, &points, config.n_samples, config.seed)?;

    // per-level J vectors; schedule index n is eps_{n+1}
    let mut by_level = Vec::with_capacity(schedule.len());
    for &eps in &schedule {
        by_level.push(estimate_j(&sample, &sigma, eps)?);
    }
    let j_values: Vec<Vec<f64>> = (0..config.n_samples)
        .map(|s| by_level.iter().map(|col| col[s]).collect())
        .collect();

    let last: Vec<f64> = by_level.last().expect("n_levels >= 1").clone();
    let [q1, median, q3] = quartiles(&last);
    let entropy_eps: Vec<f64> = {
        // geometric ladder spanning the mid-range of the realized sigma values
        let mut pos: Vec<f64> = Vec::new();
        for i in 0..points.len() {
            for j in 0..i {
                if sigma[(i, j)] > 0.0 {
                    pos.push(sigma[(i, j)]);
                }
            }
        }
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = pos[(0.02 * (pos.len() - 1) as f64) as usize];
        let hi = pos[(0.50 * (pos.len() - 1) as f64) as usize];
        (0..6)
            .map(|i| lo * (hi / lo).powf(i as f64 / 5.0))
            .collect()
    };
    let entropy = entropy_scan(spec, &config.grid, &entropy_eps)?;

    Ok(ModulusReport {
        epsilon_schedule: schedule,
        j_values,
        k_estimate: median,
        k_dispersion: (q3 - q1) / median,
        sandwich,
        entropy,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn white_noise() -> FieldSpec {
        FieldSpec::new(1, 1.0).unwrap()
    }

    #[test]
    fn schedule_ratio_and_substitution() {
        let spec = white_noise();
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let c2 = 0.8;
        let eps = epsilon_schedule(&spec, &domain, 6, c2).unwrap();
        assert_eq!(eps.len(), 6);
        for pair in eps.windows(2) {
            assert!(pair[1] < pair[0]);
            assert_relative_eq!(pair[1] / pair[0], 2.0f64.powf(-0.5), epsilon = 1e-14);
        }
        // delta' = min{0.5/2, 1, 2} = 0.25, so eps_n = sqrt(c2 * 0.5 * 2^-n)
        for (i, &e) in eps.iter().enumerate() {
            let n = (i + 1) as f64;
            assert_relative_eq!(e, (c2 * 2.0f64.powf(-n - 1.0)).sqrt(), epsilon = 1e-14);
        }
        assert!(matches!(
            epsilon_schedule(&spec, &domain, 3, 0.0),
            Err(ModulusError::BadC2 { .. })
        ));
    }

    fn synthetic_sample(values: DMatrix<f64>) -> FieldSample {
        let points: Vec<SpacetimePoint> = (0..values.ncols())
            .map(|i| SpacetimePoint::new1(1.0 + 0.1 * i as f64, 0.0))
            .collect();
        FieldSample {
            points,
            values,
            seed: 0,
            spec: white_noise(),
            applied_jitter: 0.0,
        }
    }

    #[test]
    fn j_zero_for_constant_realization() {
        let sample = synthetic_sample(DMatrix::zeros(1, 2));
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let j = estimate_j(&sample, &sigma, 1.0).unwrap();
        assert_eq!(j, vec![0.0]);
    }

    #[test]
    fn j_one_when_increment_equals_gamma() {
        let g = gamma_modulus(0.5).unwrap();
        let sample = synthetic_sample(DMatrix::from_row_slice(1, 2, &[0.0, g]));
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let j = estimate_j(&sample, &sigma, 1.0).unwrap();
        assert_relative_eq!(j[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn j_is_nested_in_epsilon() {
        let mut stream = crate::rng::substream(11, 0);
        let n = 6;
        let values = DMatrix::from_fn(4, n, |_, _| crate::rng::uniform_in(&mut stream, -1.0, 1.0));
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let s = crate::rng::uniform_in(&mut stream, 0.1, 1.0);
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
            }
        }
        let sample = synthetic_sample(values);
        let mut prev: Option<Vec<f64>> = None;
        for eps in [1.0, 0.8, 0.6, 0.4, 0.2] {
            let j = estimate_j(&sample, &sigma, eps).unwrap();
            if let Some(p) = &prev {
                for (big, small) in p.iter().zip(&j) {
                    assert!(small <= big, "J must be non-decreasing in epsilon");
                }
            }
            prev = Some(j);
        }
    }

    #[test]
    fn no_qualifying_pair_is_an_error() {
        let sample = synthetic_sample(DMatrix::zeros(1, 2));
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!(matches!(
            estimate_j(&sample, &sigma, 0.1),
            Err(ModulusError::NoQualifyingPair { .. })
        ));
    }

    #[test]
    fn entropy_exponent_reflects_sigma_scaling() {
        // sigma ~ Delta^{(2-beta)/2} on a (1+k)-dimensional box, so the
        // covering count scales like eps^{-2(1+k)/(2-beta)} = eps^{-4} here;
        // convergence in the slope is slow (metric anisotropy), so assert a
        // bracket that separates it cleanly from smaller exponents
        let spec = white_noise();
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let grid = GridSpec {
            domain,
            time_points: 60,
            space_points_per_axis: 60,
        };
        let eps: Vec<f64> = (0..6)
            .map(|i| 0.5 * (0.15f64 / 0.5).powf(i as f64 / 5.0))
            .collect();
        let record = entropy_scan(&spec, &grid, &eps).unwrap();
        assert_eq!(record.theory_exponent, 2.0);
        assert!(
            record.fitted_exponent > 3.0 && record.fitted_exponent < 4.3,
            "fitted exponent {} outside the sigma-scaling bracket [3, 4.3]",
            record.fitted_exponent
        );
    }

    #[test]
    fn entropy_needs_three_levels() {
        let spec = white_noise();
        let grid = GridSpec {
            domain: DomainBox::new(1.0, 2.0, 1.0).unwrap(),
            time_points: 10,
            space_points_per_axis: 10,
        };
        assert!(matches!(
            entropy_scan(&spec, &grid, &[2.0, 3.0, 4.0]),
            Err(ModulusError::TooFewLevels { usable: 0 })
        ));
    }

    #[test]
    fn experiment_produces_finite_monotone_j() {
        let spec = white_noise();
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let config = ModulusConfig {
            domain,
            grid: GridSpec {
                domain,
                time_points: 30,
                space_points_per_axis: 30,
            },
            n_levels: 3,
            n_samples: 24,
            seed: 5,
        };
        let report = modulus_experiment(&spec, &config).unwrap();
        assert_eq!(report.j_values.len(), 24);
        for row in &report.j_values {
            assert_eq!(row.len(), 3);
            for pair in row.windows(2) {
                assert!(pair[0].is_finite() && pair[0] > 0.0);
                // schedule is decreasing, so J must not increase along it
                assert!(pair[1] <= pair[0]);
            }
        }
        assert!(report.k_estimate > 0.0 && report.k_estimate.is_finite());
        assert!(report.k_dispersion >= 0.0 && report.k_dispersion.is_finite());
        assert!(report.sandwich.c1 > 0.0 && report.sandwich.c2.is_finite());
    }
}
