use super::{dotc, Matrix, C64};
use crate::error::{Error, Result};

/// Upper triangular `R` with `A = R^* R` and positive real diagonal.
///
/// Only the upper triangle of `A` is read. A non-positive pivot means the
/// matrix is numerically indefinite; callers fall back to a QR-based path.
pub fn cholesky_factor(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky_factor needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let cj = &r.col(j)[..j];
        let s = a[(j, j)].re - cj.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = s.sqrt();
        r[(j, j)] = C64::new(d, 0.0);
        for i in (j + 1)..n {
            let t = dotc(&r.col(j)[..j], &r.col(i)[..j]);
            r[(j, i)] = (a[(j, i)] - t) / d;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::UNIT_ROUNDOFF;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(cholesky_factor(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let r = cholesky_factor(&Matrix::from_real_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(r, Matrix::from_real_diag(&[2.0, 3.0]));
    }

    #[test]
    fn reconstructs_gram_plus_identity() {
        let x = Matrix::from_fn(6, 4, |i, j| C64::new((i as f64 * 0.7 - j as f64).sin(), (i * j) as f64 * 0.1));
        let a = x.gram().shift_diag(1.0);
        let r = cholesky_factor(&a).unwrap();
        let err = (&r.adjoint_mul(&r) - &a).frobenius_norm();
        assert!(err <= 50.0 * 4.0 * UNIT_ROUNDOFF * a.frobenius_norm());
        for i in 0..4 {
            assert!(r[(i, i)].re > 0.0);
            for k in (i + 1)..4 {
                assert_eq!(r[(k, i)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = Matrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(cholesky_factor(&a), Err(Error::NotPositiveDefinite { pivot: 1 }));
    }
}
