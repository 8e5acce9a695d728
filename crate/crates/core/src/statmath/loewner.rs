use super::{CovMatrix, Matrix, Vector};

/// Eigenvalue slack for Loewner comparisons.
pub const LOEWNER_TOL: f64 = 1e-10;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<const D: usize>(m: &Matrix<D>) -> Vector<D> {
    let mut a = (m + m.transpose()) * 0.5;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..D {
            for q in (p + 1)..D {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..D {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Vector::<D>::from_fn(|i, _| a[(i, i)])
}

/// `true` iff the smallest eigenvalue of `m` is at least `-tol`.
pub fn is_psd<const D: usize>(m: &Matrix<D>, tol: f64) -> bool {
    symmetric_eigenvalues(m).min() >= -tol
}

/// Loewner order `m ≥ n` on symmetric matrices.
pub fn loewner_geq_matrix<const D: usize>(m: &Matrix<D>, n: &Matrix<D>) -> bool {
    is_psd(&(m - n), LOEWNER_TOL)
}

/// Loewner order `m ≥ n` on covariances.
pub fn loewner_geq<const D: usize>(m: &CovMatrix<D>, n: &CovMatrix<D>) -> bool {
    loewner_geq_matrix(m.matrix(), n.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statmath::{Mat2, Mat4};

    #[test]
    fn eigenvalues_of_known_matrices() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let mut ev: [f64; 2] = symmetric_eigenvalues(&m).into();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);

        let d = Mat4::from_diagonal(&Vector::<4>::new(4.0, -1.0, 2.0, 0.5));
        let ev = symmetric_eigenvalues(&d);
        assert_eq!(ev.min(), -1.0);
        assert_eq!(ev.max(), 4.0);
    }

    #[test]
    fn eigenvalue_sum_is_trace() {
        let m = Mat4::new(
            4.0, 1.0, -0.5, 0.2, 1.0, 3.0, 0.3, 0.0, -0.5, 0.3, 2.0, 0.7, 0.2, 0.0, 0.7, 1.0,
        );
        let ev = symmetric_eigenvalues(&m);
        assert!((ev.sum() - m.trace()).abs() < 1e-12);
        let det: f64 = ev.iter().product();
        assert!((det - m.determinant()).abs() < 1e-9);
    }

    #[test]
    fn loewner_examples() {
        let i = CovMatrix::<2>::scaled_identity(1.0).unwrap();
        let two = CovMatrix::<2>::scaled_identity(2.0).unwrap();
        assert!(loewner_geq(&i, &i));
        assert!(loewner_geq(&two, &i));
        assert!(!loewner_geq(&i, &two));
        let a = CovMatrix::from_diagonal(&[3.0, 1.0]).unwrap();
        let b = CovMatrix::from_diagonal(&[2.0, 2.0]).unwrap();
        assert!(!loewner_geq(&a, &b));
        assert!(!loewner_geq(&b, &a));
    }
}
