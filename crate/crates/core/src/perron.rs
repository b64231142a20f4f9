//! Perron–Frobenius root of a nonnegative matrix.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

const MAX_SQUARINGS: usize = 64;

/// Spectral radius of a nonnegative square matrix.
///
/// Works on `M + εI` with `ε = 1e-3·max(M)`, which is primitive on every
/// irreducible class, and accelerates power iteration by repeated squaring
/// with renormalization. The root is read off with left and right
/// approximate eigenvectors (column and row sums of the current power), so
/// the error decays like the square of the power-iteration error.
pub fn perron_root<T: Real>(m: &Matrix<T>) -> Result<T> {
    assert!(m.is_square(), "Perron root of a non-square matrix");
    if !m.is_finite() || m.min_entry() < T::zero() {
        return Err(Error::InvalidParameter(
            "Perron root needs a finite nonnegative matrix".into(),
        ));
    }
    let scale = m.max_entry();
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let n = m.rows();
    let eps = T::lit(1e-3);
    // work with B = M/scale + eps·I so that entries are O(1)
    let mut b = m.scale(T::one() / scale);
    for i in 0..n {
        b[(i, i)] += eps;
    }
    let estimate = |p: &Matrix<T>| {
        let x = p.row_sums();
        let y = p.transpose().row_sums();
        let bx = b.mul_vec(&x);
        let num: T = y.iter().zip(&bx).map(|(&a, &c)| a * c).sum();
        let den: T = y.iter().zip(&x).map(|(&a, &c)| a * c).sum();
        num / den
    };
    let mut p = b.clone();
    let mut prev = estimate(&p);
    let tol = T::epsilon() * T::lit(4.0);
    let mut stalls = 0;
    for _ in 0..MAX_SQUARINGS {
        p = p.matmul(&p);
        let norm = p.max_abs();
        p = p.scale(T::one() / norm);
        let lam = estimate(&p);
        if (lam - prev).abs() <= tol * lam {
            stalls += 1;
            // two agreeing steps rule out an accidental match
            if stalls >= 2 {
                return Ok(((lam - eps) * scale).max(T::zero()));
            }
        } else {
            stalls = 0;
        }
        prev = lam;
    }
    Err(Error::NonConvergence {
        what: "Perron root",
        iterations: MAX_SQUARINGS,
        residual: (estimate(&p) - prev).abs().as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn permutation_matrix() {
        assert!((perron_root(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_two_by_two() {
        let (a, b, c, d): (f64, f64, f64, f64) = (0.2, 0.3, 0.4, 0.1);
        let tr = a + d;
        let det = a * d - b * c;
        let expect = tr / 2.0 + (tr * tr / 4.0 - det).sqrt();
        let got = perron_root(&mat(&[&[a, b], &[c, d]])).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn zero_and_nilpotent() {
        assert_eq!(perron_root(&Matrix::<f64>::zeros(3, 3)).unwrap(), 0.0);
        assert!(perron_root(&mat(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap() < 1e-12);
    }

    #[test]
    fn reducible_takes_largest_class() {
        let m = mat(&[&[0.5, 0.2, 0.0], &[0.0, 0.9, 0.0], &[0.3, 0.0, 0.1]]);
        assert!((perron_root(&m).unwrap() - 0.9).abs() < 1e-13);
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(perron_root(&mat(&[&[0.5, -0.1], &[0.0, 0.2]])).is_err());
    }

    #[test]
    fn stochastic_matrix_in_single_precision() {
        let m = Matrix::<f32>::from_rows(&[vec![0.25, 0.75], vec![0.6, 0.4]]).unwrap();
        assert!((perron_root(&m).unwrap() - 1.0).abs() < 1e-6);
    }
}
