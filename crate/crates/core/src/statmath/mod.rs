//! Small dense Gaussian algebra.
//!
//! Dimensions are const generics; the crate only ever instantiates 2 (the
//! position marginal and the control noise) and 4 (the full state). Every
//! [`CovMatrix`] carries its Cholesky factor, so Mahalanobis distances, sampling
//! and whitening never form an explicit inverse.

mod chi2;
mod loewner;

pub use chi2::{chi2_cdf, chi2_quantile, regularized_lower_gamma};
pub use loewner::{is_psd, loewner_geq, loewner_geq_matrix, symmetric_eigenvalues, LOEWNER_TOL};

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{Deserializer, Error as _};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector<const D: usize> = SVector<f64, D>;
pub type Matrix<const D: usize> = SMatrix<f64, D, D>;
pub type Vec2 = Vector<2>;
pub type Vec4 = Vector<4>;
pub type Mat2 = Matrix<2>;
pub type Mat4 = Matrix<4>;

/// Pivots at or below this fraction of the largest diagonal entry are
/// treated as a loss of positive definiteness.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = Σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerTriangular<const D: usize>(Matrix<D>);

impl<const D: usize> LowerTriangular<D> {
    pub fn matrix(&self) -> &Matrix<D> {
        &self.0
    }

    /// Wraps a matrix already known to be a valid lower factor.
    pub(crate) fn from_matrix_unchecked(l: Matrix<D>) -> Self {
        Self(l)
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve(&self, b: &Vector<D>) -> Vector<D> {
        let l = &self.0;
        let mut x = Vector::<D>::zeros();
        for i in 0..D {
            let mut acc = b[i];
            for j in 0..i {
                acc -= l[(i, j)] * x[j];
            }
            x[i] = acc / l[(i, i)];
        }
        x
    }

    pub fn mul_vec(&self, z: &Vector<D>) -> Vector<D> {
        let l = &self.0;
        let mut out = Vector::<D>::zeros();
        for i in 0..D {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix<D> {
        self.0 * self.0.transpose()
    }
}

/// Cholesky factorization of a symmetric matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot is not strictly
/// positive relative to the matrix scale.
pub fn cholesky<const D: usize>(m: &Matrix<D>) -> Result<LowerTriangular<D>> {
    let mut scale: f64 = 0.0;
    for i in 0..D {
        scale = scale.max(libm::fabs(m[(i, i)]));
    }
    let floor = PIVOT_REL_TOL * scale;
    let mut l = Matrix::<D>::zeros();
    for j in 0..D {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > floor && pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = libm::sqrt(pivot);
        l[(j, j)] = d;
        for i in (j + 1)..D {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(LowerTriangular(l))
}

/// Symmetric positive-definite covariance with its Cholesky factor.
#[derive(Clone, Copy, PartialEq)]
pub struct CovMatrix<const D: usize> {
    m: Matrix<D>,
    chol: LowerTriangular<D>,
}

impl<const D: usize> fmt::Debug for CovMatrix<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CovMatrix").field(&self.m).finish()
    }
}

impl<const D: usize> CovMatrix<D> {
    /// Symmetrizes `(M + Mᵀ)/2`, then checks finiteness and positive
    /// definiteness.
    pub fn new(m: Matrix<D>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let m = (m + m.transpose()) * 0.5;
        let chol = cholesky(&m)?;
        Ok(Self { m, chol })
    }

    pub fn scaled_identity(s: f64) -> Result<Self> {
        Self::new(Matrix::<D>::identity() * s)
    }

    pub fn from_diagonal(diag: &[f64; D]) -> Result<Self> {
        let mut m = Matrix::<D>::zeros();
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix<D> {
        &self.m
    }

    pub fn factor(&self) -> &LowerTriangular<D> {
        &self.chol
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `s Σ`, with the factor rescaled by `√s` instead of refactorized.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidScaling(s));
        }
        Ok(Self {
            m: self.m * s,
            chol: LowerTriangular(self.chol.0 * libm::sqrt(s)),
        })
    }

    /// Principal `K×K` block starting at `offset`.
    pub fn block<const K: usize>(&self, offset: usize) -> Result<CovMatrix<K>> {
        if offset + K > D {
            return Err(Error::invalid("covariance block out of range"));
        }
        CovMatrix::new(self.m.fixed_view::<K, K>(offset, offset).into_owned())
    }

    /// Squared Mahalanobis norm `dᵀ Σ⁻¹ d` via a triangular solve.
    pub fn quad_form(&self, d: &Vector<D>) -> f64 {
        self.chol.solve(d).norm_squared()
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..D).map(|i| (0..D).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != D || rows.iter().any(|r| r.len() != D) {
            return Err(Error::invalid("covariance has wrong dimensions"));
        }
        Self::new(Matrix::<D>::from_fn(|i, j| rows[i][j]))
    }
}

impl<const D: usize> Serialize for CovMatrix<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(D))?;
        for i in 0..D {
            let row: Vec<f64> = (0..D).map(|j| self.m[(i, j)]).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de, const D: usize> Deserialize<'de> for CovMatrix<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> core::result::Result<Self, De::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        CovMatrix::from_rows(&rows).map_err(De::Error::custom)
    }
}

/// Multivariate normal belief.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian<const D: usize> {
    pub mean: Vector<D>,
    pub cov: CovMatrix<D>,
}

impl<const D: usize> Gaussian<D> {
    pub fn new(mean: Vector<D>, cov: CovMatrix<D>) -> Result<Self> {
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { mean, cov })
    }

    pub fn mahalanobis_sq(&self, y: &Vector<D>) -> f64 {
        self.cov.quad_form(&(y - self.mean))
    }

    pub fn mahalanobis(&self, y: &Vector<D>) -> f64 {
        libm::sqrt(self.mahalanobis_sq(y))
    }

    /// `L⁻¹ (y − μ)`.
    pub fn whiten(&self, y: &Vector<D>) -> Vector<D> {
        self.cov.factor().solve(&(y - self.mean))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<D> {
        let z = Vector::<D>::from_fn(|_, _| rng.sample(StandardNormal));
        self.mean + self.cov.factor().mul_vec(&z)
    }

    /// The `(1 − alpha)` confidence hyperellipsoid.
    pub fn confidence_ellipsoid(&self, alpha: f64) -> Result<ConfidenceEllipsoid<D>> {
        let radius2 = chi2_quantile(D as u32, 1.0 - alpha)?;
        ConfidenceEllipsoid::new(self.mean, self.cov, radius2)
    }
}

/// Mahalanobis distance from `y` to `g`.
pub fn mahalanobis<const D: usize>(g: &Gaussian<D>, y: &Vector<D>) -> f64 {
    g.mahalanobis(y)
}

/// `n` draws `μ + L z` with `z` standard normal.
pub fn sample_gaussian<const D: usize, R: Rng + ?Sized>(
    g: &Gaussian<D>,
    rng: &mut R,
    n: usize,
) -> Vec<Vector<D>> {
    (0..n).map(|_| g.sample(rng)).collect()
}

/// `{y : (y − c)ᵀ S⁻¹ (y − c) ≤ r²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceEllipsoid<const D: usize> {
    pub center: Vector<D>,
    pub shape: CovMatrix<D>,
    pub radius2: f64,
}

impl<const D: usize> ConfidenceEllipsoid<D> {
    pub fn new(center: Vector<D>, shape: CovMatrix<D>, radius2: f64) -> Result<Self> {
        if !(radius2 >= 0.0) {
            return Err(Error::invalid("ellipsoid radius² must be non-negative"));
        }
        Ok(Self {
            center,
            shape,
            radius2,
        })
    }

    pub fn contains(&self, y: &Vector<D>) -> bool {
        self.shape.quad_form(&(y - self.center)) <= self.radius2
    }
}

pub fn ellipsoid_contains<const D: usize>(e: &ConfidenceEllipsoid<D>, y: &Vector<D>) -> bool {
    e.contains(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn random_spd(seed: u64) -> Mat4 {
        let mut rng = SeedTree::new(seed).stream("spd", 0);
        let g = Mat4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        g * g.transpose() + Mat4::identity() * 0.1
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky(&Mat4::identity()).unwrap();
        assert_eq!(*l.matrix(), Mat4::identity());
        let l = cholesky(&Mat2::new(4.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(*l.matrix(), Mat2::new(2.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        for seed in 0..50 {
            let m = random_spd(seed);
            let l = cholesky(&m).unwrap();
            let err = (l.reconstruct() - m).norm() / m.norm();
            assert!(err < 1e-9, "relative error {err}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_and_singular() {
        let m = Mat2::new(1.0, 2.0, 2.0, 1.0);
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        let m = Mat2::new(1.0, 1.0, 1.0, 1.0);
        assert!(cholesky(&m).is_err());
        assert!(cholesky(&Mat2::zeros()).is_err());
    }

    #[test]
    fn cov_rejects_non_finite() {
        let mut m = Mat2::identity();
        m[(0, 1)] = f64::NAN;
        assert_eq!(CovMatrix::new(m).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn cov_symmetrizes_input() {
        let m = Mat2::new(2.0, 0.5, 0.3, 1.0);
        let c = CovMatrix::new(m).unwrap();
        assert_eq!(c.matrix()[(0, 1)], c.matrix()[(1, 0)]);
        assert!((c.matrix()[(0, 1)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn mahalanobis_examples() {
        let g = Gaussian::new(Vec4::zeros(), CovMatrix::scaled_identity(1.0).unwrap()).unwrap();
        assert_eq!(mahalanobis(&g, &Vec4::zeros()), 0.0);
        let g = Gaussian::new(Vec2::zeros(), CovMatrix::scaled_identity(1.0).unwrap()).unwrap();
        assert!((mahalanobis(&g, &Vec2::new(3.0, 4.0)) - 5.0).abs() < 1e-12);
        // explicit inverse diag(1/4, 1): 2²/4 + 1² = 2
        let g = Gaussian::new(Vec2::zeros(), CovMatrix::from_diagonal(&[4.0, 1.0]).unwrap()).unwrap();
        assert!((mahalanobis(&g, &Vec2::new(2.0, 1.0)) - libm::sqrt(2.0)).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse() {
        for seed in 0..20 {
            let m = random_spd(100 + seed);
            let g = Gaussian::new(Vec4::new(0.1, -0.2, 0.3, 0.0), CovMatrix::new(m).unwrap()).unwrap();
            let y = Vec4::new(1.0, 2.0, -1.0, 0.5);
            let d = y - g.mean;
            let inv = m.try_inverse().unwrap();
            let expected = (d.transpose() * inv * d)[(0, 0)];
            assert!((g.mahalanobis_sq(&y) - expected).abs() < 1e-8 * expected.max(1.0));
        }
    }

    #[test]
    fn ellipsoid_membership() {
        let shape = CovMatrix::<2>::scaled_identity(1.0).unwrap();
        let e = ConfidenceEllipsoid::new(Vec2::zeros(), shape, 4.605170).unwrap();
        assert!(ellipsoid_contains(&e, &Vec2::zeros()));
        assert!(e.contains(&Vec2::new(2.1, 0.0)));
        assert!(!e.contains(&Vec2::new(2.2, 0.0)));
        let point = ConfidenceEllipsoid::new(Vec2::zeros(), shape, 0.0).unwrap();
        assert!(point.contains(&Vec2::zeros()));
        assert!(!point.contains(&Vec2::new(1e-9, 0.0)));
        assert!(ConfidenceEllipsoid::new(Vec2::zeros(), shape, -1.0).is_err());
    }

    #[test]
    fn sampling_vanishing_spread_and_determinism() {
        let g = Gaussian::new(Vec4::new(1.0, 2.0, 3.0, 4.0), CovMatrix::scaled_identity(1e-12).unwrap())
            .unwrap();
        let mut rng = SeedTree::new(3).stream("sample", 0);
        for p in sample_gaussian(&g, &mut rng, 3) {
            assert!((p - g.mean).amax() < 1e-4);
        }
        let a = sample_gaussian(&g, &mut SeedTree::new(9).stream("s", 0), 5);
        let b = sample_gaussian(&g, &mut SeedTree::new(9).stream("s", 0), 5);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_converges() {
        let g = Gaussian::new(Vec2::zeros(), CovMatrix::scaled_identity(1.0).unwrap()).unwrap();
        let mut rng = SeedTree::new(11).stream("lln", 0);
        let n = 100_000;
        let pts = sample_gaussian(&g, &mut rng, n);
        let mean: Vec2 = pts.iter().sum::<Vec2>() / n as f64;
        let cov: Mat2 = pts.iter().map(|p| (p - mean) * (p - mean).transpose()).sum::<Mat2>() / n as f64;
        assert!((cov - Mat2::identity()).amax() < 0.05);
    }

    #[test]
    fn scaled_keeps_factor_consistent() {
        let c = CovMatrix::new(random_spd(5)).unwrap();
        let s = c.scaled(3.7).unwrap();
        assert!((s.factor().reconstruct() - s.matrix()).amax() < 1e-10);
        assert!(c.scaled(0.0).is_err());
        assert!(c.scaled(f64::INFINITY).is_err());
    }
}
