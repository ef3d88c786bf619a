//! Polar decomposition `A = W H` by SVD, QDWH and Zolotarev iterations, the
//! interval-modified variant for nearly rank-deficient input, and the
//! canonical polar decomposition.

mod elliptic;
mod sign;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use elliptic::{agm, ellipj, ellipk_from_complement};
pub use sign::{
    choose_p, eval_sign_approx, HalleyStep, SignApprox, SignApproxParams, SignStep, ZoloStep,
    GRID_POINTS, GRID_TOLERANCE, MAX_P, MIN_ELL,
};

use crate::error::{Error, Result};
use crate::kernel::{
    cholesky_factor, qr_factor, solve_triangular, svd_factor, Matrix, Side, Trans, C64,
    UNIT_ROUNDOFF,
};
use crate::testgen::Gaussian;

/// Default lower endpoint for the interval-modified iteration.
pub const DEFAULT_EPSILON: f64 = 1e-15;
/// QDWH iteration cap; enough for any `ell >= 1e-16`.
pub const QDWH_MAX_ITERATIONS: usize = 6;
/// Iterates switch from the QR form to the Cholesky form at this `ell`.
pub const CHOLESKY_SWITCH: f64 = 0.1;
const INVERSE_ITERATION_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarMethod {
    Svd,
    #[default]
    Qdwh,
    Zolo,
}

impl PolarMethod {
    pub const ALL: [PolarMethod; 3] = [PolarMethod::Svd, PolarMethod::Qdwh, PolarMethod::Zolo];

    pub fn as_str(self) -> &'static str {
        match self {
            PolarMethod::Svd => "svd",
            PolarMethod::Qdwh => "qdwh",
            PolarMethod::Zolo => "zolo",
        }
    }
}

impl fmt::Display for PolarMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolarMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(PolarMethod::Svd),
            "qdwh" => Ok(PolarMethod::Qdwh),
            "zolo" => Ok(PolarMethod::Zolo),
            other => Err(Error::InvalidArgument(format!("unknown polar method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarMode {
    /// `W` has orthonormal columns.
    Exact,
    /// `W = U r(Sigma) V^*`; singular values below epsilon are not pushed to 1.
    IntervalModified,
}

#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub w: Matrix,
    pub h: Matrix,
    pub mode: PolarMode,
    pub method: PolarMethod,
    /// Estimate of `sigma_min(A)` (unscaled).
    pub sigma_min_estimate: f64,
    /// Matrix iterations performed (0 for the SVD route).
    pub iterations: usize,
    /// The scalar map that was applied to the scaled singular values.
    pub params: Option<SignApproxParams>,
}

impl PolarFactors {
    /// `||W H - A||_F`
    pub fn residual(&self, a: &Matrix) -> f64 {
        (&self.w.matmul(&self.h) - a).frobenius_norm()
    }
}

/// Cheap norm and conditioning information used to set up the iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    /// Upper bound on `sigma_max(A)` used to scale the iteration.
    pub scale: f64,
    /// Estimate of `sigma_min(A)`, never below the true value by more than
    /// rounding.
    pub sigma_min: f64,
    /// Lower endpoint handed to the iteration, `sigma_min / scale / 2`.
    pub ell: f64,
}

impl ConditionEstimate {
    /// `sigma_min / scale`
    pub fn ratio(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.sigma_min / self.scale
        }
    }
}

fn require_tall(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() < a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("{what}: non-finite input")));
    }
    Ok(())
}

/// Upper bound on `||A||_2`: the smaller of `||A||_F` and `sqrt(||A||_1 ||A||_inf)`.
pub fn polar_scale(a: &Matrix) -> f64 {
    a.frobenius_norm().min((a.norm_1() * a.norm_inf()).sqrt())
}

/// Estimates `sigma_min(A)` from the `R` factor of `A`: the smallest
/// `|R_ii|` refined by inverse iteration on `R^* R`.
pub fn estimate_sigma_min(a: &Matrix) -> Result<f64> {
    let n = a.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let r = qr_factor(a)?.r;
    let diag_min = r.real_diag().into_iter().fold(f64::INFINITY, f64::min);
    if diag_min == 0.0 {
        return Ok(0.0);
    }
    let mut x = Gaussian::new(0x5151_0001).matrix(n, 1);
    let nx = x.frobenius_norm();
    x = x.scale_real(1.0 / nx);
    let mut est = diag_min;
    for _ in 0..INVERSE_ITERATION_STEPS {
        let y = match solve_triangular(&r, &x, Side::Left, Trans::Adjoint)
            .and_then(|t| solve_triangular(&r, &t, Side::Left, Trans::No))
        {
            Ok(y) => y,
            Err(_) => return Ok(0.0),
        };
        let ny = y.frobenius_norm();
        if !ny.is_finite() {
            return Ok(0.0);
        }
        if ny == 0.0 {
            break;
        }
        est = est.min(1.0 / ny.sqrt());
        x = y.scale_real(1.0 / ny);
    }
    Ok(est)
}

pub fn estimate_condition(a: &Matrix) -> Result<ConditionEstimate> {
    let scale = polar_scale(a);
    let sigma_min = estimate_sigma_min(a)?;
    let ell = if scale == 0.0 { 0.0 } else { (0.5 * sigma_min / scale).min(1.0) };
    Ok(ConditionEstimate {
        scale,
        sigma_min,
        ell,
    })
}

/// `H = ((W^* A) + (W^* A)^*) / 2`
fn hermitian_factor(w: &Matrix, a: &Matrix) -> Matrix {
    w.adjoint_mul(a).hermitian_part()
}

/// Polar factors from the SVD `A = P Sigma Q^*`: `W = P Q^*`, `H = Q Sigma Q^*`.
pub fn polar_svd(a: &Matrix) -> Result<PolarFactors> {
    require_tall(a, "polar_svd")?;
    let f = svd_factor(a)?;
    let w = f.p.mul_adjoint(&f.q);
    let mut qs = f.q.clone();
    for (j, &s) in f.sigma.iter().enumerate() {
        qs.scale_col(j, C64::new(s, 0.0));
    }
    let h = qs.mul_adjoint(&f.q).hermitian_part();
    Ok(PolarFactors {
        w,
        h,
        mode: PolarMode::Exact,
        method: PolarMethod::Svd,
        sigma_min_estimate: f.sigma.last().copied().unwrap_or(0.0),
        iterations: 0,
        params: None,
    })
}

/// `X (g X^* X + d I)^{-1}`, by QR of `[sqrt(g) X; sqrt(d) I]` or by
/// Cholesky of `g X^* X + d I`.
fn resolvent(x: &Matrix, g: f64, d: f64, use_cholesky: bool) -> Result<Matrix> {
    let n = x.ncols();
    if use_cholesky {
        let z = x.gram().scale_real(g).shift_diag(d);
        match cholesky_factor(&z) {
            Ok(r) => {
                let y = solve_triangular(&r, x, Side::Right, Trans::No)?;
                return solve_triangular(&r, &y, Side::Right, Trans::Adjoint);
            }
            Err(Error::NotPositiveDefinite { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let m = x.nrows();
    let stacked = Matrix::vstack(&x.scale_real(g.sqrt()), &Matrix::identity(n).scale_real(d.sqrt()));
    let q = qr_factor(&stacked)?.q;
    let q1 = q.rows_range(0, m);
    let q2 = q.rows_range(m, n);
    Ok(q1.mul_adjoint(&q2).scale_real(1.0 / (g * d).sqrt()))
}

fn apply_step(x: &Matrix, step: &SignStep, ell: f64) -> Result<Matrix> {
    let chol = ell >= CHOLESKY_SWITCH;
    match step {
        SignStep::Halley(h) => {
            let r = resolvent(x, h.c, 1.0, chol)?;
            Ok(x.axpby(h.b / h.c, &r, h.a - h.b / h.c))
        }
        SignStep::Zolo(z) => {
            let terms: Vec<Result<Matrix>> = z
                .poles
                .par_iter()
                .zip(&z.weights)
                .map(|(&c, &w)| resolvent(x, 1.0, c, chol).map(|r| r.scale_real(w)))
                .collect();
            let mut acc = x.clone();
            for t in terms {
                acc = &acc + &t?;
            }
            Ok(acc.scale_real(z.scale))
        }
    }
}

/// Runs the iteration for the scaled matrix `x0 = A / scale`.
/// Returns the final iterate, the number of steps, and the parameters of the
/// scalar map actually applied.
fn iterate(
    x0: Matrix,
    params: SignApproxParams,
    adaptive_qdwh: bool,
    exact: bool,
) -> Result<(Matrix, usize, SignApproxParams)> {
    let plan = SignApprox::new(params)?;
    let conv_tol = (5.0 * UNIT_ROUNDOFF).cbrt();
    let mut x = x0;
    let mut done = 0;
    for (k, step) in plan.steps.iter().enumerate() {
        let next = apply_step(&x, step, plan.ells[k])?;
        done = k + 1;
        if adaptive_qdwh {
            let SignStep::Halley(h) = step else { unreachable!() };
            let ell_next = h.next_ell(plan.ells[k]);
            let settled = (1.0 - ell_next).abs() <= 10.0 * UNIT_ROUNDOFF;
            let moved = (&next - &x).frobenius_norm();
            x = next;
            let converged = if exact { settled && moved <= conv_tol } else { settled };
            if converged {
                break;
            }
            if done == plan.steps.len() {
                return Err(Error::NoConvergence {
                    what: "QDWH polar iteration",
                    iterations: done,
                });
            }
        } else {
            x = next;
        }
    }
    Ok((
        x,
        done,
        SignApproxParams {
            iterations: done,
            ..params
        },
    ))
}

/// Polar decomposition by a rational sign iteration.
///
/// `params.p == 1` runs QDWH with `params.iterations` as the cap;
/// `params.p >= 2` runs exactly `params.iterations` Zolotarev steps.
/// `params.ell` must bound `sigma_min(A) / polar_scale(A)` from below.
pub fn polar_iterative(a: &Matrix, params: SignApproxParams) -> Result<PolarFactors> {
    require_tall(a, "polar_iterative")?;
    params.validate()?;
    let n = a.ncols();
    let scale = polar_scale(a);
    let method = if params.p == 1 { PolarMethod::Qdwh } else { PolarMethod::Zolo };
    if scale == 0.0 {
        return Err(Error::Precondition("polar_iterative: zero matrix".into()));
    }
    let (w, iterations, applied) = iterate(a.scale_real(1.0 / scale), params, params.p == 1, true)?;
    if params.p > 1 && n > 0 {
        let orth = w.orthogonality_error_fro();
        if orth > 50.0 * n as f64 * UNIT_ROUNDOFF {
            return Err(Error::NoConvergence {
                what: "Zolotarev polar iteration",
                iterations,
            });
        }
    }
    let h = hermitian_factor(&w, a);
    Ok(PolarFactors {
        w,
        h,
        mode: PolarMode::Exact,
        method,
        sigma_min_estimate: params.ell * scale,
        iterations,
        params: Some(applied),
    })
}

/// Parameters the exact-mode iteration uses for a given `ell`.
pub fn default_params(method: PolarMethod, ell: f64) -> Result<SignApproxParams> {
    let ell = ell.clamp(MIN_ELL, 1.0);
    match method {
        PolarMethod::Qdwh => Ok(SignApproxParams {
            p: 1,
            ell,
            iterations: QDWH_MAX_ITERATIONS,
        }),
        PolarMethod::Zolo => Ok(SignApproxParams {
            p: choose_p(ell).max(2),
            ell,
            iterations: 2,
        }),
        PolarMethod::Svd => Err(Error::InvalidArgument("the SVD route has no sign map".into())),
    }
}

/// Polar decomposition by `method` with internally estimated conditioning.
/// Falls back to the SVD when the iteration does not converge.
pub fn polar(a: &Matrix, method: PolarMethod) -> Result<PolarFactors> {
    require_tall(a, "polar")?;
    if method == PolarMethod::Svd {
        return polar_svd(a);
    }
    let est = estimate_condition(a)?;
    if est.ratio() < DEFAULT_EPSILON {
        return polar_svd(a);
    }
    match polar_iterative(a, default_params(method, est.ell)?) {
        Ok(mut f) => {
            f.sigma_min_estimate = est.sigma_min;
            Ok(f)
        }
        Err(Error::NoConvergence { .. }) => polar_svd(a),
        Err(e) => Err(e),
    }
}

/// Interval-modified polar decomposition: the applied map sends `[eps, 1]`
/// to `1 - O(u)` and `[0, eps]` into `[0, 1]`, so `W` need not be
/// orthonormal when `A` is (nearly) rank deficient, but `H` is accurate.
pub fn polar_modified(a: &Matrix, epsilon: f64, method: PolarMethod) -> Result<PolarFactors> {
    require_tall(a, "polar_modified")?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    let scale = polar_scale(a);
    let sigma_min = estimate_sigma_min(a)?;
    if scale == 0.0 {
        return Ok(PolarFactors {
            w: Matrix::zeros(a.nrows(), a.ncols()),
            h: Matrix::zeros(a.ncols(), a.ncols()),
            mode: PolarMode::IntervalModified,
            method,
            sigma_min_estimate: 0.0,
            iterations: 0,
            params: None,
        });
    }
    let params = match method {
        PolarMethod::Zolo => SignApproxParams {
            p: choose_p(epsilon).max(2),
            ell: epsilon,
            iterations: 2,
        },
        // the SVD route has no interval variant; QDWH is the p = 1 member
        PolarMethod::Qdwh | PolarMethod::Svd => SignApproxParams {
            p: 1,
            ell: epsilon,
            iterations: QDWH_MAX_ITERATIONS + 2,
        },
    };
    let (w, iterations, applied) =
        iterate(a.scale_real(1.0 / scale), params, params.p == 1, false)?;
    let h = hermitian_factor(&w, a);
    Ok(PolarFactors {
        w,
        h,
        mode: PolarMode::IntervalModified,
        method: if params.p == 1 { PolarMethod::Qdwh } else { PolarMethod::Zolo },
        sigma_min_estimate: sigma_min,
        iterations,
        params: Some(applied),
    })
}

/// `A = U H` with `U` a partial isometry and `range(U^*) = range(H)`.
#[derive(Debug, Clone)]
pub struct CanonicalPolar {
    pub u: Matrix,
    pub h: Matrix,
    pub rank: usize,
}

/// Canonical polar decomposition from the SVD truncated at the number of
/// singular values above `rank_tol`.
pub fn canonical_polar(a: &Matrix, rank_tol: f64) -> Result<CanonicalPolar> {
    let f = svd_factor(a)?;
    let rank = f.sigma.iter().filter(|&&s| s > rank_tol).count();
    let p = f.p.cols_range(0, rank);
    let q = f.q.cols_range(0, rank);
    let u = p.mul_adjoint(&q);
    let mut qs = q.clone();
    for j in 0..rank {
        qs.scale_col(j, C64::new(f.sigma[j], 0.0));
    }
    let h = qs.mul_adjoint(&q).hermitian_part();
    Ok(CanonicalPolar { u, h, rank })
}
