//! The Gaussian field u(t, x): parameter validation, covariance engines,
//! canonical metric and modulus functional.

mod direct;
mod spectral;

pub use direct::covariance_direct_k1;
pub use spectral::{covariance_spectral, covariance_spectral_with_tol};

use dashmap::DashMap;
use thiserror::Error;

use crate::numerics::special::gamma;
use crate::numerics::{LinalgError, QuadError, SpecialError};
use crate::rng;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("inadmissible field parameters k={k}, beta={beta}: need k in {{1,2,3}} and 0 < beta < min(k, 2), or k = 1 and beta = 1")]
    Inadmissible { k: usize, beta: f64 },
    #[error("operation requires k = 1, got k = {k}")]
    RequiresK1 { k: usize },
    #[error("point has t = {t}, but time must be finite and >= 0")]
    BadTime { t: f64 },
    #[error("invalid domain box: need 0 < a < a' and 0 < b, got a={a}, a'={a_prime}, b={b}")]
    BadDomain { a: f64, a_prime: f64, b: f64 },
    #[error("negative sigma input {sigma} to the modulus functional")]
    NegativeSigma { sigma: f64 },
    #[error("covariance produced an invalid sigma^2 = {value} for a point pair")]
    BadSigmaSquared { value: f64 },
    #[error("quadrature failure while evaluating covariance: {0}")]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The spectral normalization constant c_{k,beta}: the density multiplying
/// |xi|^{beta-k} in the Fourier representation of the noise covariance,
/// under the convention F(f)(xi) = int f(x) exp(-i xi.x) dx with Plancherel
/// factor (2 pi)^{-k}. The white-noise case k = 1 = beta has flat density
/// 1/(2 pi).
pub fn riesz_spectral_constant(k: usize, beta: f64) -> Result<f64, FieldError> {
    check_admissible(k, beta)?;
    if k == 1 && beta == 1.0 {
        return Ok(1.0 / (2.0 * std::f64::consts::PI));
    }
    let kf = k as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(two_pi.powi(-(k as i32))
        * 2.0f64.powf(kf - beta)
        * std::f64::consts::PI.powf(kf / 2.0)
        * gamma((kf - beta) / 2.0)
        / gamma(beta / 2.0))
}

fn check_admissible(k: usize, beta: f64) -> Result<(), FieldError> {
    let ok = matches!(k, 1 | 2 | 3)
        && beta.is_finite()
        && ((beta > 0.0 && beta < (k as f64).min(2.0)) || (k == 1 && beta == 1.0));
    if ok {
        Ok(())
    } else {
        Err(FieldError::Inadmissible { k, beta })
    }
}

/// Field parameters: spatial dimension, Riesz exponent and the validated
/// spectral constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    k: usize,
    beta: f64,
    norm_const: f64,
}

impl FieldSpec {
    pub fn new(k: usize, beta: f64) -> Result<Self, FieldError> {
        let norm_const = riesz_spectral_constant(k, beta)?;
        Ok(FieldSpec {
            k,
            beta,
            norm_const,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// Space-time white noise: k = 1, beta = 1.
    pub fn is_white_noise(&self) -> bool {
        self.k == 1 && self.beta == 1.0
    }
}

/// A point (t, x) with t >= 0 and x in R^k; unused spatial slots are zero.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpacetimePoint {
    pub t: f64,
    x: [f64; 3],
    k: usize,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: &[f64]) -> Result<Self, FieldError> {
        if !(t.is_finite() && t >= 0.0) || x.iter().any(|v| !v.is_finite()) || x.len() > 3 {
            return Err(FieldError::BadTime { t });
        }
        let mut buf = [0.0; 3];
        buf[..x.len()].copy_from_slice(x);
        Ok(SpacetimePoint {
            t,
            x: buf,
            k: x.len(),
        })
    }

    pub fn new1(t: f64, x: f64) -> Self {
        SpacetimePoint {
            t,
            x: [x, 0.0, 0.0],
            k: 1,
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x[..self.k]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Euclidean distance between the spatial parts.
    pub fn spatial_distance(&self, other: &SpacetimePoint) -> f64 {
        let mut s = 0.0;
        for i in 0..self.k.max(other.k) {
            let d = self.x[i] - other.x[i];
            s += d * d;
        }
        s.sqrt()
    }

    /// l1 space-time distance |t - t'| + sum |x_j - x'_j|.
    pub fn l1_distance(&self, other: &SpacetimePoint) -> f64 {
        let mut s = (self.t - other.t).abs();
        for i in 0..self.k.max(other.k) {
            s += (self.x[i] - other.x[i]).abs();
        }
        s
    }
}

/// The compact parameter box I = [a, a'] x [-b, b]^k.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainBox {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
}

impl DomainBox {
    pub fn new(a: f64, a_prime: f64, b: f64) -> Result<Self, FieldError> {
        if 0.0 < a && a < a_prime && a_prime.is_finite() && 0.0 < b && b.is_finite() {
            Ok(DomainBox { a, a_prime, b })
        } else {
            Err(FieldError::BadDomain { a, a_prime, b })
        }
    }

    pub fn contains(&self, p: &SpacetimePoint) -> bool {
        self.a <= p.t
            && p.t <= self.a_prime
            && p.x().iter().all(|&v| -self.b <= v && v <= self.b)
    }

    /// Uniform point in I.
    pub fn sample(&self, k: usize, rng: &mut rand_chacha::ChaCha12Rng) -> SpacetimePoint {
        let t = rng::uniform_in(rng, self.a, self.a_prime);
        let mut x = [0.0; 3];
        for slot in x.iter_mut().take(k) {
            *slot = rng::uniform_in(rng, -self.b, self.b);
        }
        SpacetimePoint { t, x, k }
    }
}

type CacheKey = (u64, u64, u64);

/// Memoizing covariance evaluator.
///
/// Covariance depends on the points only through (t /\ s, t \/ s, |x - y|),
/// which is the memoization key. The cache is concurrent; values are pure
/// functions of the key, so racing writers are harmless.
pub struct CovarianceEngine {
    spec: FieldSpec,
    cache: DashMap<CacheKey, f64>,
    spectral_abs_tol: f64,
}

impl CovarianceEngine {
    pub fn new(spec: FieldSpec) -> Self {
        CovarianceEngine {
            spec,
            cache: DashMap::new(),
            spectral_abs_tol: 1e-8,
        }
    }

    /// Engine with a looser (or tighter) absolute tolerance for the spectral
    /// quadrature; only meaningful for k >= 2.
    pub fn with_spectral_tol(spec: FieldSpec, abs_tol: f64) -> Self {
        CovarianceEngine {
            spec,
            cache: DashMap::new(),
            spectral_abs_tol: abs_tol,
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// Cov(u(p), u(q)); symmetric, spatially stationary, memoized.
    pub fn covariance(&self, p: &SpacetimePoint, q: &SpacetimePoint) -> Result<f64, FieldError> {
        if p.t == 0.0 || q.t == 0.0 {
            return Ok(0.0);
        }
        let tmin = p.t.min(q.t);
        let tmax = p.t.max(q.t);
        let z = p.spatial_distance(q);
        let key = (tmin.to_bits(), tmax.to_bits(), z.to_bits());
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let pa = SpacetimePoint {
            t: tmin,
            x: [0.0; 3],
            k: self.spec.k,
        };
        let mut xb = [0.0; 3];
        xb[0] = z;
        let qa = SpacetimePoint {
            t: tmax,
            x: xb,
            k: self.spec.k,
        };
        let value = if self.spec.k == 1 {
            covariance_direct_k1(&self.spec, &pa, &qa)?
        } else {
            covariance_spectral_with_tol(&self.spec, &pa, &qa, self.spectral_abs_tol)?
        };
        self.cache.insert(key, value);
        Ok(value)
    }

    pub fn variance(&self, p: &SpacetimePoint) -> Result<f64, FieldError> {
        self.covariance(p, p)
    }

    /// Canonical metric sigma[p, q] = E[(u(p) - u(q))^2]^{1/2}.
    pub fn sigma_metric(
        &self,
        p: &SpacetimePoint,
        q: &SpacetimePoint,
    ) -> Result<f64, FieldError> {
        let radicand =
            self.variance(p)? + self.variance(q)? - 2.0 * self.covariance(p, q)?;
        let clamp_floor = -(1e-12f64).max(10.0 * self.spectral_abs_tol);
        if radicand >= 0.0 {
            Ok(radicand.sqrt())
        } else if radicand >= clamp_floor {
            Ok(0.0)
        } else {
            Err(FieldError::BadSigmaSquared { value: radicand })
        }
    }
}

/// The modulus normalizer gamma = sigma sqrt(log(1 + 1/sigma)), extended
/// continuously by 0 at sigma = 0.
pub fn gamma_modulus(sigma: f64) -> Result<f64, FieldError> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(FieldError::NegativeSigma { sigma });
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(sigma * (1.0 + 1.0 / sigma).ln().sqrt())
}

/// Empirical Holder-sandwich constants: min and max of
/// sigma^2 / Delta^{2 - beta} over random pairs in the box with l1
/// separation Delta in (0, max_delta].
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SandwichRecord {
    pub c1: f64,
    pub c2: f64,
    pub n_pairs: usize,
    pub max_delta: f64,
    pub seed: u64,
}

pub fn sandwich_scan(
    engine: &CovarianceEngine,
    domain: &DomainBox,
    n_pairs: usize,
    max_delta: f64,
    seed: u64,
) -> Result<SandwichRecord, FieldError> {
    use rayon::prelude::*;

    let k = engine.spec().k();
    let beta = engine.spec().beta();
    let ratios: Vec<f64> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| -> Result<f64, FieldError> {
            let mut rng = rng::substream(seed, i);
            loop {
                let p = domain.sample(k, &mut rng);
                let q = domain.sample(k, &mut rng);
                let delta = p.l1_distance(&q);
                if delta <= 0.0 || delta > max_delta {
                    continue;
                }
                let sigma = engine.sigma_metric(&p, &q)?;
                return Ok(sigma * sigma / delta.powf(2.0 - beta));
            }
        })
        .collect::<Result<_, _>>()?;

    let c1 = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let c2 = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SandwichRecord {
        c1,
        c2,
        n_pairs,
        max_delta,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn riesz_constant_examples() {
        let white = riesz_spectral_constant(1, 1.0).unwrap();
        assert_relative_eq!(white, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-14);
        // (1, 0.5): the Gamma factors cancel, leaving 1/sqrt(2 pi)
        let half = riesz_spectral_constant(1, 0.5).unwrap();
        assert_relative_eq!(half, (2.0 * std::f64::consts::PI).sqrt().recip(), epsilon = 1e-12);
        let c = riesz_spectral_constant(2, 1.5).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn inadmissible_parameters_rejected() {
        for (k, beta) in [(1, 2.0), (2, 2.0), (0, 0.5), (4, 0.5), (1, 0.0), (2, -0.3)] {
            assert!(matches!(
                FieldSpec::new(k, beta),
                Err(FieldError::Inadmissible { .. })
            ));
        }
        // boundary admissible cases
        assert!(FieldSpec::new(1, 1.0).is_ok());
        assert!(FieldSpec::new(3, 1.9999).is_ok());
    }

    #[test]
    fn covariance_symmetry_and_shift_invariance() {
        let engine = CovarianceEngine::new(FieldSpec::new(1, 0.5).unwrap());
        let mut r = rng::substream(11, 0);
        for _ in 0..100 {
            let t = rng::uniform_in(&mut r, 0.5, 2.0);
            let s = rng::uniform_in(&mut r, 0.5, 2.0);
            let x = rng::uniform_in(&mut r, -1.0, 1.0);
            let y = rng::uniform_in(&mut r, -1.0, 1.0);
            let (p, q) = (SpacetimePoint::new1(t, x), SpacetimePoint::new1(s, y));
            let pq = engine.covariance(&p, &q).unwrap();
            let qp = engine.covariance(&q, &p).unwrap();
            assert_eq!(pq, qp);
            let shift = 0.37;
            let ps = SpacetimePoint::new1(t, x + shift);
            let qs = SpacetimePoint::new1(s, y + shift);
            // shift changes |x - y| by at most an ulp
            assert_relative_eq!(engine.covariance(&ps, &qs).unwrap(), pq, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_time_covariance_vanishes() {
        let engine = CovarianceEngine::new(FieldSpec::new(2, 0.8).unwrap());
        let p = SpacetimePoint::new(0.0, &[0.3, 0.1]).unwrap();
        let q = SpacetimePoint::new(1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(engine.covariance(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn white_noise_variance_is_t_squared_over_four() {
        let engine = CovarianceEngine::new(FieldSpec::new(1, 1.0).unwrap());
        for t in [0.5, 1.0, 2.0] {
            let p = SpacetimePoint::new1(t, 0.0);
            assert_relative_eq!(engine.variance(&p).unwrap(), t * t / 4.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn sigma_metric_examples() {
        let engine = CovarianceEngine::new(FieldSpec::new(1, 1.0).unwrap());
        let p = SpacetimePoint::new1(1.0, 0.0);
        assert_eq!(engine.sigma_metric(&p, &p).unwrap(), 0.0);
        let q = SpacetimePoint::new1(1.1, 0.0);
        assert_relative_eq!(
            engine.sigma_metric(&p, &q).unwrap(),
            0.0525f64.sqrt(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn gamma_modulus_examples() {
        assert_eq!(gamma_modulus(0.0).unwrap(), 0.0);
        assert_relative_eq!(gamma_modulus(1.0).unwrap(), 2.0f64.ln().sqrt(), epsilon = 1e-14);
        assert!(gamma_modulus(-0.1).is_err());
        // strictly increasing on a small-sigma grid
        let mut prev = 0.0;
        let mut sigma = 1e-6;
        while sigma <= 0.1 {
            let g = gamma_modulus(sigma).unwrap();
            assert!(g > prev, "gamma not increasing at sigma={sigma}");
            prev = g;
            sigma *= 1.2;
        }
    }

    fn min_eigenvalue_of_gram(k: usize, beta: f64, seed: u64) -> (f64, f64) {
        let engine = CovarianceEngine::new(FieldSpec::new(k, beta).unwrap());
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let mut r = rng::substream(seed, 0);
        let points: Vec<SpacetimePoint> = (0..12).map(|_| domain.sample(k, &mut r)).collect();
        let n = points.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = engine.covariance(&points[i], &points[j]).unwrap();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let min_ev = a
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        (min_ev, max_diag)
    }

    #[test]
    fn random_gram_matrices_are_psd() {
        for (k, beta, seed) in [(1usize, 1.0, 5), (1, 0.5, 6), (2, 0.8, 7), (3, 1.5, 8)] {
            let (min_ev, max_diag) = min_eigenvalue_of_gram(k, beta, seed);
            assert!(
                min_ev >= -1e-9 * max_diag,
                "k={k} beta={beta}: min eigenvalue {min_ev}, max diag {max_diag}"
            );
        }
    }

    #[test]
    fn sandwich_ratio_bounded() {
        let engine = CovarianceEngine::new(FieldSpec::new(1, 0.5).unwrap());
        let domain = DomainBox::new(1.0, 2.0, 1.0).unwrap();
        let rec = sandwich_scan(&engine, &domain, 200, 0.5, 99).unwrap();
        assert!(rec.c1 > 0.0, "lower sandwich constant {}", rec.c1);
        assert!(rec.c2.is_finite() && rec.c2 >= rec.c1);
        // determinism: same seed reproduces the record
        let rec2 = sandwich_scan(&engine, &domain, 200, 0.5, 99).unwrap();
        assert_eq!(rec.c1, rec2.c1);
        assert_eq!(rec.c2, rec2.c2);
    }

    #[test]
    fn spatial_stationarity_k3() {
        // variance independent of the spatial location for k = 3
        let spec = FieldSpec::new(3, 1.5).unwrap();
        let p0 = SpacetimePoint::new(1.0, &[0.0, 0.0, 0.0]).unwrap();
        let p1 = SpacetimePoint::new(1.0, &[0.7, -0.2, 0.4]).unwrap();
        let v0 = covariance_spectral(&spec, &p0, &p0).unwrap();
        let v1 = covariance_spectral(&spec, &p1, &p1).unwrap();
        assert_eq!(v0, v1);
    }

    #[test]
    fn domain_box_validation() {
        assert!(DomainBox::new(1.0, 2.0, 1.0).is_ok());
        assert!(DomainBox::new(0.0, 2.0, 1.0).is_err());
        assert!(DomainBox::new(2.0, 1.0, 1.0).is_err());
        assert!(DomainBox::new(1.0, 2.0, 0.0).is_err());
    }
}
