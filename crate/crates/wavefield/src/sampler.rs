//! Exact sampling of the field on finite point sets.
//!
//! The law of u restricted to n points is centered Gaussian with the dense
//! covariance matrix of pairwise `covariance` values; realizations are L * z
//! for the PSD factor L and standard normal z. Dense factorization is the
//! right tool here: the field is not stationary in time, so circulant
//! embeddings do not apply, and the point budget keeps O(n^3) cheap.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{CovarianceEngine, DomainBox, FieldError, FieldSpec, SpacetimePoint};
use crate::numerics::{inv_std_normal_cdf, CovMatrix, JitterPolicy, LinalgError};
use crate::rng;

/// Largest point set accepted for factorization-backed sampling.
pub const GRID_BUDGET: usize = 3000;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("grid of {requested} points exceeds the factorization budget of {limit}")]
    BudgetExceeded { requested: usize, limit: usize },
    #[error("grid must have at least one point per axis")]
    EmptyGrid,
    #[error("covariance of point pair ({i}, {j}) failed: {source}")]
    Covariance {
        i: usize,
        j: usize,
        source: FieldError,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tensor grid over a DomainBox: equally spaced coordinates, endpoints
/// included.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub domain: DomainBox,
    pub time_points: usize,
    pub space_points_per_axis: usize,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid points in lexicographic (t, x_1, ..., x_k) order.
pub fn build_grid(g: &GridSpec, k: usize) -> Result<Vec<SpacetimePoint>, SamplerError> {
    let total = g.time_points * g.space_points_per_axis.pow(k as u32);
    if total > GRID_BUDGET {
        return Err(SamplerError::BudgetExceeded {
            requested: total,
            limit: GRID_BUDGET,
        });
    }
    grid_points(g, k)
}

/// Grid construction without the sampling budget cap; for consumers that only
/// need pairwise metric evaluations, not an O(n^3) factorization.
pub(crate) fn grid_points(
    g: &GridSpec,
    k: usize,
) -> Result<Vec<SpacetimePoint>, SamplerError> {
    if g.time_points == 0 || g.space_points_per_axis == 0 {
        return Err(SamplerError::EmptyGrid);
    }
    let total = g.time_points * g.space_points_per_axis.pow(k as u32);
    let times = linspace(g.domain.a, g.domain.a_prime, g.time_points);
    let axis = linspace(-g.domain.b, g.domain.b, g.space_points_per_axis);
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; k];
    for &t in &times {
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
            points.push(SpacetimePoint::new(t, &x)?);
            // odometer over the spatial axes, last axis fastest
            let mut axis_no = k;
            loop {
                if axis_no == 0 {
                    break;
                }
                axis_no -= 1;
                idx[axis_no] += 1;
                if idx[axis_no] < axis.len() {
                    break;
                }
                idx[axis_no] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(points)
}

/// Dense matrix of pairwise covariances; symmetry enforced by averaging the
/// (i, j) and (j, i) evaluations.
pub fn assemble_covariance_matrix(
    spec: &FieldSpec,
    points: &[SpacetimePoint],
) -> Result<CovMatrix, SamplerError> {
    let engine = CovarianceEngine::new(*spec);
    assemble_with_engine(&engine, points)
}

pub fn assemble_with_engine(
    engine: &CovarianceEngine,
    points: &[SpacetimePoint],
) -> Result<CovMatrix, SamplerError> {
    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let vij = engine
                .covariance(&points[i], &points[j])
                .map_err(|source| SamplerError::Covariance { i, j, source })?;
            let vji = engine
                .covariance(&points[j], &points[i])
                .map_err(|source| SamplerError::Covariance { i: j, j: i, source })?;
            Ok(0.5 * (vij + vji))
        })
        .collect::<Result<_, SamplerError>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(values.iter()) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(CovMatrix::new(m))
}

/// A batch of realizations; row s of `values` is sample s over `points`.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub points: Vec<SpacetimePoint>,
    pub values: DMatrix<f64>,
    pub seed: u64,
    pub spec: FieldSpec,
    pub applied_jitter: f64,
}

/// Draws `n_samples` i.i.d. realizations of the field on `points`.
///
/// Identical inputs give bit-identical output regardless of thread count:
/// sample s draws its normals from the hash-derived substream (seed, s), and
/// rows are stored by sample index, never completion order.
pub fn sample_field(
    spec: &FieldSpec,
    points: &[SpacetimePoint],
    n_samples: usize,
    seed: u64,
) -> Result<FieldSample, SamplerError> {
    if points.len() > GRID_BUDGET {
        return Err(SamplerError::BudgetExceeded {
            requested: points.len(),
            limit: GRID_BUDGET,
        });
    }
    let mut cov = assemble_covariance_matrix(spec, points)?;
    let fact = cov.factor(&JitterPolicy::default())?;
    let n = points.len();
    let lower = &fact.lower;

    let rows: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>, SamplerError> {
            let mut stream = rng::substream(seed, s);
            let z: Vec<f64> = (0..n)
                .map(|_| inv_std_normal_cdf(rng::uniform_open(&mut stream)))
                .collect::<Result<_, _>>()
                .map_err(FieldError::from)?;
            let mut row = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += lower[(i, j)] * z[j];
                }
                row[i] = acc;
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;

    let values = DMatrix::from_fn(n_samples, n, |s, i| rows[s][i]);
    Ok(FieldSample {
        points: points.to_vec(),
        values,
        seed,
        spec: *spec,
        applied_jitter: fact.applied_jitter,
    })
}
