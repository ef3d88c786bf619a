use super::{Matrix, C64, ZERO};
use crate::error::{Error, Result};

/// Which side the triangular factor is applied from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(R) X = B`.
    Left,
    /// Solve `X op(R) = B`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    /// Conjugate transpose.
    Adjoint,
}

/// Solves a triangular system with an upper triangular `r`.
pub fn solve_triangular(r: &Matrix, b: &Matrix, side: Side, trans: Trans) -> Result<Matrix> {
    if !r.is_square() {
        return Err(Error::DimensionMismatch("triangular factor must be square".into()));
    }
    let n = r.nrows();
    for i in 0..n {
        if r[(i, i)] == ZERO {
            return Err(Error::SingularTriangular { index: i });
        }
    }
    match side {
        Side::Left => {
            if b.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "left solve: R is {n}x{n}, B is {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            let mut x = b.clone();
            for j in 0..x.ncols() {
                match trans {
                    Trans::No => back_substitute(r, x.col_mut(j)),
                    Trans::Adjoint => forward_substitute_adjoint(r, x.col_mut(j)),
                }
            }
            Ok(x)
        }
        Side::Right => {
            // X op(R) = B  <=>  op(R)^* X^* = B^*
            let flipped = match trans {
                Trans::No => Trans::Adjoint,
                Trans::Adjoint => Trans::No,
            };
            if b.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "right solve: R is {n}x{n}, B is {}x{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            Ok(solve_triangular(r, &b.adjoint(), Side::Left, flipped)?.adjoint())
        }
    }
}

fn back_substitute(r: &Matrix, x: &mut [C64]) {
    let n = r.nrows();
    for k in (0..n).rev() {
        let xk = x[k] / r[(k, k)];
        x[k] = xk;
        let col = &r.col(k)[..k];
        for (xi, &rik) in x[..k].iter_mut().zip(col) {
            *xi -= rik * xk;
        }
    }
}

/// Solves `R^* x = b`, i.e. a lower triangular system with `conj(R)^T`.
fn forward_substitute_adjoint(r: &Matrix, x: &mut [C64]) {
    let n = r.nrows();
    for k in 0..n {
        let col = &r.col(k)[..k];
        let mut s = x[k];
        for (&rik, &xi) in col.iter().zip(&x[..k]) {
            s -= rik.conj() * xi;
        }
        x[k] = s / r[(k, k)].conj();
    }
}
