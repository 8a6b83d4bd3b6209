//! Dense symmetric PSD factorization with a jitter escalation ladder, and
//! Schur-complement conditional variance.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric within tolerance (max asymmetry {max_asymmetry})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("matrix not PSD within jitter ceiling {ceiling} (most negative pivot {worst_pivot})")]
    NotPsd { worst_pivot: f64, ceiling: f64 },
    #[error("dimension mismatch: {message}")]
    Dimension { message: String },
}

/// Jitter escalation ladder, expressed as multiples of the max diagonal entry.
#[derive(Debug, Clone)]
pub struct JitterPolicy {
    pub initial_factor: f64,
    pub growth: f64,
    pub ceiling_factor: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial_factor: 1e-12,
            growth: 10.0,
            ceiling_factor: 1e-8,
        }
    }
}

/// Lower-triangular Cholesky factor of `A + applied_jitter * I`.
#[derive(Debug, Clone)]
pub struct PsdFactorization {
    pub lower: DMatrix<f64>,
    pub applied_jitter: f64,
    pub dimension: usize,
}

impl PsdFactorization {
    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dimension;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lower[(i, j)] * y[j];
            }
            y[i] /= self.lower[(i, i)];
        }
        y
    }
}

/// Dense symmetric covariance matrix on an ordered point set.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub matrix: DMatrix<f64>,
    pub factorization: Option<PsdFactorization>,
}

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        CovMatrix {
            matrix,
            factorization: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn factor(&mut self, policy: &JitterPolicy) -> Result<&PsdFactorization, LinalgError> {
        if self.factorization.is_none() {
            self.factorization = Some(factor_psd(&self.matrix, policy)?);
        }
        Ok(self.factorization.as_ref().unwrap())
    }
}

fn cholesky_attempt(a: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>, f64> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 {
            return Err(d);
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Cholesky factorization of a symmetric PSD matrix, escalating diagonal
/// jitter through the ladder until a factorization succeeds.
pub fn factor_psd(a: &DMatrix<f64>, policy: &JitterPolicy) -> Result<PsdFactorization, LinalgError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LinalgError::Dimension {
            message: format!("expected square matrix, got {}x{}", a.nrows(), a.ncols()),
        });
    }
    let max_abs = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_asym > 1e-12 * max_abs.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }

    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
    let ladder_unit = if max_diag > 0.0 { max_diag } else { 1.0 };
    let ceiling = policy.ceiling_factor * ladder_unit;

    let mut worst_pivot = 0.0f64;
    let mut jitter = 0.0;
    loop {
        match cholesky_attempt(a, jitter) {
            Ok(lower) => {
                return Ok(PsdFactorization {
                    lower,
                    applied_jitter: jitter,
                    dimension: n,
                })
            }
            Err(pivot) => worst_pivot = worst_pivot.min(pivot),
        }
        jitter = if jitter == 0.0 {
            policy.initial_factor * ladder_unit
        } else {
            jitter * policy.growth
        };
        if jitter > ceiling {
            return Err(LinalgError::NotPsd {
                worst_pivot,
                ceiling,
            });
        }
    }
}

/// Conditional variance of coordinate 0 given the remaining coordinates:
/// the Schur complement `c00 - c^T C11^-1 c`, computed through the PSD
/// factorization of the conditioning block. Clamped to be nonnegative; a
/// residual below `-1e-9 * c00` indicates a broken covariance and panics in
/// debug builds via the caller's invariants, here it is simply clamped.
pub fn schur_conditional_variance(
    cov: &CovMatrix,
    policy: &JitterPolicy,
) -> Result<f64, LinalgError> {
    let n = cov.dim();
    if n == 0 {
        return Err(LinalgError::Dimension {
            message: "empty covariance matrix".to_string(),
        });
    }
    let c00 = cov.matrix[(0, 0)];
    if n == 1 {
        return Ok(c00.max(0.0));
    }
    let m = n - 1;
    let mut c11 = DMatrix::zeros(m, m);
    let mut cross = vec![0.0; m];
    for i in 0..m {
        cross[i] = cov.matrix[(i + 1, 0)];
        for j in 0..m {
            c11[(i, j)] = cov.matrix[(i + 1, j + 1)];
        }
    }
    let fact = factor_psd(&c11, policy)?;
    let y = fact.forward_solve(&cross);
    let explained: f64 = y.iter().map(|v| v * v).sum();
    Ok((c00 - explained).max(0.0))
}
