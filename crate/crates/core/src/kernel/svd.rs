use super::{dotc, norm2, qr_factor, Matrix, C64, UNIT_ROUNDOFF, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Compact SVD `A = P diag(sigma) Q^*` with `min(m, n)` singular triplets,
/// `sigma` nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub p: Matrix,
    pub sigma: Vec<f64>,
    pub q: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let mut ps = self.p.clone();
        for (j, &s) in self.sigma.iter().enumerate() {
            ps.scale_col(j, C64::new(s, 0.0));
        }
        ps.mul_adjoint(&self.q)
    }
}

/// Parameters `(c, s, e)` of the unitary 2x2 transform that makes the
/// columns `x`, `y` with `|x|^2 = alpha`, `|y|^2 = beta`, `x^* y = gamma`
/// orthogonal:
///
/// `x' = c x - s conj(e) y`, `y' = s x + c conj(e) y`.
///
/// The same transform diagonalizes the Hermitian 2x2 block
/// `[[alpha, gamma], [conj(gamma), beta]]` when applied as `G^* M G`.
pub(crate) fn jacobi_rotation(alpha: f64, beta: f64, gamma: C64) -> (f64, f64, C64) {
    let g = gamma.norm();
    let e = gamma / g;
    let zeta = (beta - alpha) / (2.0 * g);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + zeta.hypot(1.0))
    } else {
        -1.0 / (-zeta + zeta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    (c, c * t, e)
}

/// Applies the column transform from [`jacobi_rotation`] to columns `i < j`.
pub(crate) fn rotate_cols(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64, e: C64) {
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(j * rows);
    let xi = &mut lo[i * rows..(i + 1) * rows];
    let xj = &mut hi[..rows];
    let ec = e.conj();
    for (a, b) in xi.iter_mut().zip(xj.iter_mut()) {
        let y = *b * ec;
        let x = *a;
        *a = x * c - y * s;
        *b = x * s + y * c;
    }
}

/// One-sided (Hestenes) Jacobi on the columns of `g`, accumulating the
/// right transforms into `v` when given.
fn one_sided_jacobi(g: &mut Matrix, mut v: Option<&mut Matrix>) -> Result<()> {
    let (m, n) = g.shape();
    let tol = (m.max(1) as f64).sqrt() * 2.0 * UNIT_ROUNDOFF;
    let mut norms: Vec<f64> = (0..n).map(|j| g.col(j).iter().map(|z| z.norm_sqr()).sum()).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 1)..n {
                let alpha = norms[i];
                let beta = norms[j];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dotc(g.col(i), g.col(j));
                if gamma.norm() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let (c, s, e) = jacobi_rotation(alpha, beta, gamma);
                rotate_cols(g, i, j, c, s, e);
                if let Some(v) = v.as_deref_mut() {
                    rotate_cols(v, i, j, c, s, e);
                }
                norms[i] = g.col(i).iter().map(|z| z.norm_sqr()).sum();
                norms[j] = g.col(j).iter().map(|z| z.norm_sqr()).sum();
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::NoConvergence {
        what: "one-sided Jacobi SVD",
        iterations: MAX_SWEEPS,
    })
}

/// Fills the listed columns of `p` with an orthonormal completion of the
/// remaining columns.
fn complete_columns(p: &mut Matrix, missing: &[usize]) {
    let m = p.nrows();
    let mut done: Vec<usize> = (0..p.ncols()).filter(|j| !missing.contains(j)).collect();
    for &target in missing {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for k in 0..m {
            let mut x = vec![ZERO; m];
            x[k] = C64::new(1.0, 0.0);
            for _pass in 0..2 {
                for &j in &done {
                    let s = dotc(p.col(j), &x);
                    for (xi, &pj) in x.iter_mut().zip(p.col(j)) {
                        *xi -= pj * s;
                    }
                }
            }
            let nx = norm2(&x);
            if best.as_ref().is_none_or(|(b, _)| nx > *b) {
                best = Some((nx, x));
            }
        }
        let (nx, x) = best.expect("at least one candidate");
        for (dst, src) in p.col_mut(target).iter_mut().zip(&x) {
            *dst = src / nx;
        }
        done.push(target);
    }
}

fn svd_tall(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // QR preconditioning shrinks the Jacobi problem to n x n.
    let (mut g, q_left) = if m > n {
        let f = qr_factor(a)?;
        (f.r, Some(f.q))
    } else {
        (a.clone(), None)
    };
    let mut v = Matrix::identity(n);
    one_sided_jacobi(&mut g, Some(&mut v))?;

    let mut order: Vec<usize> = (0..n).collect();
    let sig: Vec<f64> = (0..n).map(|j| norm2(g.col(j))).collect();
    order.sort_by(|&x, &y| sig[y].total_cmp(&sig[x]).then(x.cmp(&y)));

    let sigma: Vec<f64> = order.iter().map(|&j| sig[j]).collect();
    let mut p = g.select_cols(&order);
    let q = v.select_cols(&order);
    let mut missing = Vec::new();
    for (j, &s) in sigma.iter().enumerate() {
        if s == 0.0 {
            missing.push(j);
        } else {
            for z in p.col_mut(j) {
                *z /= s;
            }
        }
    }
    if !missing.is_empty() {
        complete_columns(&mut p, &missing);
    }
    let p = match q_left {
        Some(ql) => ql.matmul(&p),
        None => p,
    };
    Ok(SvdFactors { p, sigma, q })
}

/// Backward-stable compact SVD (one-sided Jacobi after QR preconditioning).
pub fn svd_factor(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m >= n {
        svd_tall(a)
    } else {
        let f = svd_tall(&a.adjoint())?;
        Ok(SvdFactors {
            p: f.q,
            sigma: f.sigma,
            q: f.p,
        })
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let tall = if m >= n { a.clone() } else { a.adjoint() };
    let mut g = if tall.nrows() > tall.ncols() {
        qr_factor(&tall)?.r
    } else {
        tall
    };
    one_sided_jacobi(&mut g, None)?;
    let mut sig: Vec<f64> = (0..g.ncols()).map(|j| norm2(g.col(j))).collect();
    sig.sort_by(|x, y| y.total_cmp(x));
    Ok(sig)
}

/// `||A||_2`. Falls back to the Frobenius norm (an upper bound) if Jacobi
/// fails to converge, which has not been observed on finite input.
pub fn spectral_norm(a: &Matrix) -> f64 {
    match singular_values(a) {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => a.frobenius_norm(),
    }
}
