//! Hermitian eigendecomposition `B = V diag(lambda) V^*`.
//!
//! The main solver is spectral divide and conquer: the unitary polar factor
//! of `B - sI` gives the spectral projector onto eigenvalues above `s`, whose
//! range decouples `B` into two smaller Hermitian problems. A cyclic Jacobi
//! solver handles small blocks and serves as the fallback.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::svd::{jacobi_rotation, rotate_cols};
use crate::kernel::{qr_factor_full, qr_pivoted, Matrix, C64, UNIT_ROUNDOFF};
use crate::polar::{estimate_condition, polar_iterative, SignApproxParams, QDWH_MAX_ITERATIONS};

const MAX_JACOBI_SWEEPS: usize = 60;
/// Blocks at most this size go straight to the Jacobi solver.
pub const BASE_CASE: usize = 4;
const MAX_DEPTH: usize = 64;
const REFINE_STEPS: usize = 2;
/// Constant `c` of the `c n u ||B||_F` decoupling threshold.
pub const DECOUPLING_CONSTANT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigMethod {
    #[default]
    Sdc,
    Direct,
}

impl EigMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EigMethod::Sdc => "sdc",
            EigMethod::Direct => "direct",
        }
    }
}

impl fmt::Display for EigMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EigMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdc" => Ok(EigMethod::Sdc),
            "direct" | "jacobi" => Ok(EigMethod::Direct),
            other => Err(Error::InvalidArgument(format!("unknown eigensolver '{other}'"))),
        }
    }
}

/// Diagnostics of one accepted spectral split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub n: usize,
    pub n_plus: usize,
    pub shift: f64,
    /// `||P^2 - P||_F`
    pub projector_error: f64,
    /// `||V_-^* B V_+||_F / ||B||_F`
    pub decoupling: f64,
}

#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub v: Matrix,
    /// Ascending.
    pub lambda: Vec<f64>,
    pub method: EigMethod,
    /// Every split taken by the divide-and-conquer solver, in recursion order.
    pub splits: Vec<SplitRecord>,
}

impl SymEigResult {
    /// `||V diag(lambda) V^* - B||_F`
    pub fn residual(&self, b: &Matrix) -> f64 {
        let mut vl = self.v.clone();
        for (j, &l) in self.lambda.iter().enumerate() {
            vl.scale_col(j, C64::new(l, 0.0));
        }
        (&vl.mul_adjoint(&self.v) - b).frobenius_norm()
    }
}

fn require_square(b: &Matrix, what: &str) -> Result<()> {
    if !b.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if !b.is_finite() {
        return Err(Error::InvalidArgument(format!("{what}: non-finite input")));
    }
    Ok(())
}

/// Row version of [`rotate_cols`]: applies `G^*` from the left.
fn rotate_rows(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64, e: C64) {
    for k in 0..m.ncols() {
        let x = m[(i, k)];
        let y = m[(j, k)] * e;
        m[(i, k)] = x * c - y * s;
        m[(j, k)] = x * s + y * c;
    }
}

/// Makes the largest-magnitude entry of every column real and positive.
pub fn normalize_phases(v: &mut Matrix) {
    for j in 0..v.ncols() {
        let col = v.col(j);
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs * (1.0 + 1e-12) {
                best = i;
                best_abs = a;
            }
        }
        if best_abs > 0.0 {
            let ph = col[best].conj() / best_abs;
            v.scale_col(j, ph);
            v.col_mut(j)[best].im = 0.0;
        }
    }
}

/// Sorts eigenpairs ascending (stable) and normalizes phases.
fn finish(mut v: Matrix, lambda: Vec<f64>) -> (Matrix, Vec<f64>) {
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| lambda[i]).collect();
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        v = v.select_cols(&order);
    }
    normalize_phases(&mut v);
    (v, sorted)
}

fn jacobi_raw(b: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let n = b.nrows();
    let mut a = b.hermitian_part();
    let mut v = Matrix::identity(n);
    let tol = UNIT_ROUNDOFF * a.frobenius_norm() / n.max(1) as f64;
    let mut converged = n <= 1;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let scale = (a[(p, p)].re.abs() * a[(q, q)].re.abs()).sqrt();
                if g.norm() <= tol.max(UNIT_ROUNDOFF * scale) {
                    continue;
                }
                rotated = true;
                let (c, s, e) = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, g);
                rotate_cols(&mut a, p, q, c, s, e);
                rotate_rows(&mut a, p, q, c, s, e);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                rotate_cols(&mut v, p, q, c, s, e);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Jacobi eigensolver",
            iterations: MAX_JACOBI_SWEEPS,
        });
    }
    Ok((v, a.real_diag()))
}

/// Cyclic Jacobi eigensolver.
pub fn symeig_direct(b: &Matrix) -> Result<SymEigResult> {
    require_square(b, "symeig_direct")?;
    let (v, lambda) = jacobi_raw(b)?;
    let (v, lambda) = finish(v, lambda);
    Ok(SymEigResult {
        v,
        lambda,
        method: EigMethod::Direct,
        splits: Vec::new(),
    })
}

/// Result of splitting the spectrum at a shift.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Orthonormal basis of the eigenspace for eigenvalues above the shift.
    pub v_plus: Matrix,
    /// Orthonormal basis of the complement.
    pub v_minus: Matrix,
    pub n_plus: usize,
    pub record: SplitRecord,
}

/// Splits the spectrum of `b` at `s` using the polar factor of `b - sI`.
pub fn spectral_split(b: &Matrix, s: f64) -> Result<SpectralSplit> {
    require_square(b, "spectral_split")?;
    let n = b.nrows();
    let b = b.hermitian_part();
    let bnorm = b.frobenius_norm();
    let shifted = b.shift_diag(-s);
    let est = estimate_condition(&shifted)?;
    if est.scale == 0.0 || est.ratio() < UNIT_ROUNDOFF {
        return Err(Error::SplitFailed { shift: s });
    }
    let params = SignApproxParams {
        p: 1,
        ell: est.ell.max(UNIT_ROUNDOFF / 2.0),
        iterations: QDWH_MAX_ITERATIONS,
    };
    let w = match polar_iterative(&shifted, params) {
        Ok(f) => f.w.hermitian_part(),
        Err(Error::NoConvergence { .. }) => return Err(Error::SplitFailed { shift: s }),
        Err(e) => return Err(e),
    };
    let p = w.shift_diag(1.0).scale_real(0.5);
    let projector_error = (&p.matmul(&p) - &p).frobenius_norm();
    let n_plus = p.trace().re.round().clamp(0.0, n as f64) as usize;

    let mut q = qr_pivoted(&p)?.q;
    let threshold = DECOUPLING_CONSTANT * n as f64 * UNIT_ROUNDOFF;
    let mut decoupling = 0.0;
    for step in 0..=REFINE_STEPS {
        let vp = q.cols_range(0, n_plus);
        let vm = q.cols_range(n_plus, n - n_plus);
        decoupling = if bnorm == 0.0 || n_plus == 0 || n_plus == n {
            0.0
        } else {
            vm.adjoint_mul(&b.matmul(&vp)).frobenius_norm() / bnorm
        };
        if decoupling <= threshold {
            return Ok(SpectralSplit {
                v_plus: vp,
                v_minus: vm,
                n_plus,
                record: SplitRecord {
                    n,
                    n_plus,
                    shift: s,
                    projector_error,
                    decoupling,
                },
            });
        }
        if step < REFINE_STEPS {
            // one step of subspace iteration with the projector
            q = qr_factor_full(&p.matmul(&vp))?.q;
        }
    }
    let _ = decoupling;
    Err(Error::SplitFailed { shift: s })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

type Partial = (Matrix, Vec<f64>, Vec<SplitRecord>);

fn sdc_rec(b: &Matrix, depth: usize) -> Result<Partial> {
    let n = b.nrows();
    if n <= BASE_CASE || depth >= MAX_DEPTH {
        let (v, l) = jacobi_raw(b)?;
        return Ok((v, l, Vec::new()));
    }
    let diag = b.real_diag();
    let mean = diag.iter().sum::<f64>() / n as f64;
    let spread = b.shift_diag(-mean).frobenius_norm();
    if spread <= UNIT_ROUNDOFF * b.frobenius_norm() {
        // numerically a multiple of the identity
        return Ok((Matrix::identity(n), vec![mean; n], Vec::new()));
    }
    let s0 = median(&diag);
    let shifts = [s0, s0 + 0.13 * spread / (n as f64).sqrt()];
    let split = shifts.iter().find_map(|&s| match spectral_split(b, s) {
        Ok(sp) if sp.n_plus > 0 && sp.n_plus < n => Some(Ok(sp)),
        Ok(_) | Err(Error::SplitFailed { .. }) => None,
        Err(e) => Some(Err(e)),
    });
    let split = match split {
        Some(sp) => sp?,
        None => {
            let (v, l) = jacobi_raw(b)?;
            return Ok((v, l, Vec::new()));
        }
    };
    let bm = split.v_minus.adjoint_mul(&b.matmul(&split.v_minus)).hermitian_part();
    let bp = split.v_plus.adjoint_mul(&b.matmul(&split.v_plus)).hermitian_part();
    let (lo, hi) = rayon::join(|| sdc_rec(&bm, depth + 1), || sdc_rec(&bp, depth + 1));
    let (vm, lm, rm) = lo?;
    let (vp, lp, rp) = hi?;
    let v = Matrix::hstack(&split.v_minus.matmul(&vm), &split.v_plus.matmul(&vp));
    let mut lambda = lm;
    lambda.extend(lp);
    let mut records = vec![split.record];
    records.extend(rm);
    records.extend(rp);
    Ok((v, lambda, records))
}

/// Spectral divide-and-conquer eigensolver.
pub fn symeig_sdc(b: &Matrix) -> Result<SymEigResult> {
    require_square(b, "symeig_sdc")?;
    let (v, lambda, splits) = sdc_rec(&b.hermitian_part(), 0)?;
    let (v, lambda) = finish(v, lambda);
    Ok(SymEigResult {
        v,
        lambda,
        method: EigMethod::Sdc,
        splits,
    })
}

pub fn symeig(b: &Matrix, method: EigMethod) -> Result<SymEigResult> {
    match method {
        EigMethod::Sdc => symeig_sdc(b),
        EigMethod::Direct => symeig_direct(b),
    }
}

/// Eigenpairs with eigenvalues in a closed interval.
#[derive(Debug, Clone)]
pub struct IntervalEig {
    pub v: Matrix,
    pub lambda: Vec<f64>,
    pub splits: Vec<SplitRecord>,
}

/// Distance past `hi` at which the spectrum is split off before solving.
pub const INTERVAL_SPLIT_MARGIN: f64 = 0.1;

/// Eigenpairs of `b` with eigenvalues in `[lo - tol, hi + tol]`,
/// `tol = 50 n u ||B||_F`. The part of the spectrum above
/// `hi + INTERVAL_SPLIT_MARGIN` is split off first and never solved for.
pub fn symeig_interval(b: &Matrix, lo: f64, hi: f64, method: EigMethod) -> Result<IntervalEig> {
    require_square(b, "symeig_interval")?;
    if lo > hi {
        return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
    }
    let n = b.nrows();
    let b = b.hermitian_part();
    let tol = DECOUPLING_CONSTANT * n.max(1) as f64 * UNIT_ROUNDOFF * b.frobenius_norm();
    let (basis, sub, mut splits) = match method {
        EigMethod::Direct => (None, b.clone(), Vec::new()),
        EigMethod::Sdc => match spectral_split(&b, hi + INTERVAL_SPLIT_MARGIN) {
            Ok(sp) => {
                let bm = sp.v_minus.adjoint_mul(&b.matmul(&sp.v_minus)).hermitian_part();
                (Some(sp.v_minus), bm, vec![sp.record])
            }
            Err(Error::SplitFailed { .. }) => (None, b.clone(), Vec::new()),
            Err(e) => return Err(e),
        },
    };
    let eig = symeig(&sub, method)?;
    splits.extend(eig.splits);
    let keep: Vec<usize> = (0..eig.lambda.len())
        .filter(|&i| eig.lambda[i] >= lo - tol && eig.lambda[i] <= hi + tol)
        .collect();
    let mut v = eig.v.select_cols(&keep);
    if let Some(basis) = basis {
        v = basis.matmul(&v);
        normalize_phases(&mut v);
    }
    Ok(IntervalEig {
        v,
        lambda: keep.iter().map(|&i| eig.lambda[i]).collect(),
        splits,
    })
}
