use super::{dotc, norm2, Matrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Thin QR factors with the unique phase convention: `R` has a real,
/// nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder reflectors `I - beta v v^*` stored column by column.
struct Reflectors {
    m: usize,
    vs: Vec<Vec<C64>>,
    betas: Vec<f64>,
    /// Unit phases applied to the columns of Q so that `R_kk >= 0`.
    phases: Vec<C64>,
}

impl Reflectors {
    /// Applies `H_0 H_1 ... H_{k-1}` to the identity columns, then the phases.
    fn form_q(&self, ncols: usize) -> Matrix {
        let m = self.m;
        let k = self.vs.len();
        let mut q = Matrix::eye(m, ncols);
        for step in (0..k).rev() {
            let beta = self.betas[step];
            if beta == 0.0 {
                continue;
            }
            let v = &self.vs[step];
            for j in step..ncols {
                let col = &mut q.col_mut(j)[step..];
                let s = dotc(v, col) * beta;
                for (c, &vi) in col.iter_mut().zip(v) {
                    *c -= vi * s;
                }
            }
        }
        for (j, &d) in self.phases.iter().enumerate() {
            if d != ONE {
                q.scale_col(j, d);
            }
        }
        q
    }
}

/// Reduces `work` in place to upper triangular form. Returns the reflectors
/// and the column permutation (identity unless `pivot`).
fn householder(work: &mut Matrix, pivot: bool) -> (Reflectors, Vec<usize>) {
    let (m, n) = work.shape();
    let steps = m.min(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut refl = Reflectors {
        m,
        vs: Vec::with_capacity(steps),
        betas: Vec::with_capacity(steps),
        phases: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        if pivot {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let nj = norm2(&work.col(j)[k..]);
                if nj > best_norm {
                    best_norm = nj;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    let t = work[(i, k)];
                    work[(i, k)] = work[(i, best)];
                    work[(i, best)] = t;
                }
                perm.swap(k, best);
            }
        }
        let x = &work.col(k)[k..];
        let xnorm = norm2(x);
        if xnorm == 0.0 {
            refl.vs.push(vec![ZERO; m - k]);
            refl.betas.push(0.0);
            refl.phases.push(ONE);
            continue;
        }
        let x0 = x[0];
        let phase = if x0 == ZERO { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let beta = 2.0 / vnorm2;
        {
            let col = &mut work.col_mut(k)[k..];
            col[0] = alpha;
            for z in col.iter_mut().skip(1) {
                *z = ZERO;
            }
        }
        for j in (k + 1)..n {
            let col = &mut work.col_mut(j)[k..];
            let s = dotc(&v, col) * beta;
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c -= vi * s;
            }
        }
        // Move the phase of alpha from R onto Q.
        let d = alpha / xnorm;
        for j in k..n {
            work[(k, j)] *= d.conj();
        }
        work[(k, k)] = C64::new(xnorm, 0.0);
        refl.vs.push(v);
        refl.betas.push(beta);
        refl.phases.push(d);
    }
    (refl, perm)
}

fn upper_part(work: &Matrix, rows: usize) -> Matrix {
    let n = work.ncols();
    Matrix::from_fn(rows, n, |i, j| if i <= j { work[(i, j)] } else { ZERO })
}

/// Thin Householder QR, `A = QR` with `Q` `m x n` and `R` `n x n` upper
/// triangular with real nonnegative diagonal.
pub fn qr_factor(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "qr_factor needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut work = a.clone();
    let (refl, _) = householder(&mut work, false);
    Ok(QrFactors {
        q: refl.form_q(n),
        r: upper_part(&work, n),
    })
}

/// Full QR: `Q` is `m x m` unitary and `R` is `m x n`.
pub fn qr_factor_full(a: &Matrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "qr_factor_full needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut work = a.clone();
    let (refl, _) = householder(&mut work, false);
    Ok(QrFactors {
        q: refl.form_q(m),
        r: upper_part(&work, m),
    })
}

/// Column-pivoted QR `A P = Q R` with full square `Q`.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    pub q: Matrix,
    pub r: Matrix,
    /// `perm[k]` is the original index of the k-th column of `A P`.
    pub perm: Vec<usize>,
}

pub fn qr_pivoted(a: &Matrix) -> Result<PivotedQr> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::DimensionMismatch(format!(
            "qr_pivoted needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut work = a.clone();
    let (refl, perm) = householder(&mut work, true);
    Ok(PivotedQr {
        q: refl.form_q(m),
        r: upper_part(&work, m),
        perm,
    })
}
