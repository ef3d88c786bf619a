//! CS decomposition of a partial isometry `A = [A1; A2]` from the polar
//! decompositions `A_i = W_i H_i` and one Hermitian eigendecomposition of
//! `B = H2 - H1 + mu (I - A^* A)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{dist_to_partial_isometry, eps_rank_from_sigma, NormKind};
use crate::kernel::{qr_factor, singular_values, spectral_norm, Matrix, C64, UNIT_ROUNDOFF};
use crate::polar::{
    default_params, estimate_condition, polar_iterative, polar_modified, polar_svd, PolarFactors,
    PolarMethod, DEFAULT_EPSILON,
};
use crate::symeig::{symeig, symeig_interval, EigMethod};

/// Inputs with `d(A)` above this are rejected.
pub const D_GATE: f64 = 0.1;
/// Active eigenvalues of `B` lie in `[-1, 1]` up to `O(d(A))`; the null
/// space sits at `mu = 2`. Eigenvalues within this slack of `[-1, 1]` are kept.
pub const EIGENVALUE_SLACK: f64 = D_GATE;
/// Shift applied to the null space of `A` in the rank-deficient case.
pub const RANK_DEFICIENT_MU: f64 = 2.0;
/// Constant `c` in the `c n u` threshold on the R-factor agreement.
pub const R_AGREEMENT_CONSTANT: f64 = 1e3;
/// Relative threshold of the epsilon-rank cross-check.
pub const RANK_CHECK_EPS: f64 = 1e-8;
/// `c` in the `c n u` orthogonality recheck of `W_i V_1r` in the rank-deficient case.
pub const ORTH_RECHECK_CONSTANT: f64 = 10.0;
/// Unitarity gate of the 2x2 completion.
pub const UNITARY_GATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    /// `A` has orthonormal columns.
    Full,
    /// `A` is a rank-deficient partial isometry; the rank is `nint(||A||_F^2)`.
    Deficient,
    /// Decide from `nint(||A||_F^2)`, cross-checked against the epsilon-rank.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsExtraction {
    /// `C = diag(V1^* H1 V1)`, `S = diag(V1^* H2 V1)`.
    #[default]
    DiagProjection,
    /// Solve `sin(theta) - cos(theta) = lambda`.
    FromLambda,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => [$($name:literal),+]),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => [$($name),+][0],)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($($name)|+ => Ok($ty::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum!(RankMode { Full => ["full"], Deficient => ["deficient"], Auto => ["auto"] });
named_enum!(CsExtraction {
    DiagProjection => ["diag", "diag_projection"],
    FromLambda => ["lambda", "from_lambda"],
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    FullRank,
    IllConditioned,
    RankDeficient,
    RankDeficientIllConditioned,
}

named_enum!(Branch {
    FullRank => ["full_rank"],
    IllConditioned => ["ill_conditioned"],
    RankDeficient => ["rank_deficient"],
    RankDeficientIllConditioned => ["rank_deficient_ill_conditioned"],
});

/// How the polar factor of one block was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRoute {
    Svd,
    Iterative,
    /// Interval-modified iteration; `W` not orthonormal.
    Modified,
    /// Interval-modified `H` with `W` rebuilt from QR factors.
    QrFix,
    /// The R-factor check failed and the SVD supplied `W`.
    SvdFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsdOptions {
    pub polar_method: PolarMethod,
    pub epsilon: f64,
    pub rank_mode: RankMode,
    pub postprocess: bool,
    pub cs_extraction: CsExtraction,
    pub eig_method: EigMethod,
    /// Diagnostic: diagonalize `H1` instead of `B`. Unstable by design.
    pub b_from_h1: bool,
}

impl Default for CsdOptions {
    fn default() -> Self {
        Self {
            polar_method: PolarMethod::default(),
            epsilon: DEFAULT_EPSILON,
            rank_mode: RankMode::default(),
            postprocess: true,
            cs_extraction: CsExtraction::default(),
            eig_method: EigMethod::default(),
            b_from_h1: false,
        }
    }
}

impl CsdOptions {
    pub fn with_method(method: PolarMethod) -> Self {
        Self {
            polar_method: method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1e-8) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} outside (0, 1e-8)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CsdResult {
    pub u1: Matrix,
    pub u2: Matrix,
    /// Diagonal of `C`.
    pub c: Vec<f64>,
    /// Diagonal of `S`.
    pub s: Vec<f64>,
    pub v1: Matrix,
    /// Ascending, in `[0, pi/2]`.
    pub theta: Vec<f64>,
    pub rank: usize,
    pub mu: f64,
    pub branch: Branch,
    /// Eigenvalues of `B` belonging to the returned columns.
    pub lambda: Vec<f64>,
    pub routes: [BlockRoute; 2],
    /// `||R~ - R||_F / ||R||_F` for blocks that went through the QR fix.
    pub r_agreement: [Option<f64>; 2],
}

impl CsdResult {
    /// Number of returned angle pairs.
    pub fn k(&self) -> usize {
        self.theta.len()
    }

    /// `[U1 C V1^*; U2 S V1^*]`
    pub fn reconstruct(&self) -> Matrix {
        let scaled = |u: &Matrix, d: &[f64]| {
            let mut x = u.clone();
            for (j, &v) in d.iter().enumerate() {
                x.scale_col(j, C64::new(v, 0.0));
            }
            x.mul_adjoint(&self.v1)
        };
        Matrix::vstack(&scaled(&self.u1, &self.c), &scaled(&self.u2, &self.s))
    }

    fn permute(&mut self, order: &[usize]) {
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        self.u1 = self.u1.select_cols(order);
        self.u2 = self.u2.select_cols(order);
        self.v1 = self.v1.select_cols(order);
        self.c = pick(&self.c);
        self.s = pick(&self.s);
        self.theta = pick(&self.theta);
        self.lambda = pick(&self.lambda);
    }
}

/// `B = H2 - H1 + mu (I - A^* A)`, explicitly Hermitian.
pub fn build_b(h1: &Matrix, h2: &Matrix, a: &Matrix, mu: f64) -> Matrix {
    let d = h2 - h1;
    if mu == 0.0 {
        return d.hermitian_part();
    }
    let defect = a.gram().scale_real(-1.0).shift_diag(1.0);
    d.axpby(1.0, &defect, mu).hermitian_part()
}

/// Real parts of `diag(V^* H V)`, clamped to `[0, 1]`.
fn projected_diag(v: &Matrix, h: &Matrix) -> Vec<f64> {
    let hv = h.matmul(v);
    (0..v.ncols())
        .map(|j| {
            let d: f64 = v
                .col(j)
                .iter()
                .zip(hv.col(j))
                .map(|(x, y)| (x.conj() * y).re)
                .sum();
            d.clamp(0.0, 1.0)
        })
        .collect()
}

/// `C = diag(V1^* H1 V1)` and `S = diag(V1^* H2 V1)`, clamped to `[0, 1]`.
pub fn extract_cs(v1: &Matrix, h1: &Matrix, h2: &Matrix) -> (Vec<f64>, Vec<f64>) {
    (projected_diag(v1, h1), projected_diag(v1, h2))
}

/// `theta = atan2(S, C)` and `C = cos(theta)`, `S = sin(theta)`. Pairs with
/// `C = S = 0` (padding) stay zero.
pub fn postprocess_trig(c: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut cc = Vec::with_capacity(c.len());
    let mut ss = Vec::with_capacity(c.len());
    let mut theta = Vec::with_capacity(c.len());
    for (&ci, &si) in c.iter().zip(s) {
        if ci == 0.0 && si == 0.0 {
            cc.push(0.0);
            ss.push(0.0);
            theta.push(0.0);
            continue;
        }
        let t = si.max(0.0).atan2(ci.max(0.0));
        theta.push(t);
        cc.push(t.cos());
        ss.push(t.sin());
    }
    (cc, ss, theta)
}

/// Solves `sin(theta) - cos(theta) = lambda`: `theta = asin(lambda / sqrt 2) + pi/4`.
pub fn cs_from_lambda(lambda: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let theta: Vec<f64> = lambda
        .iter()
        .map(|&l| {
            let t = (l.clamp(-1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2).asin()
                + std::f64::consts::FRAC_PI_4;
            t.clamp(0.0, std::f64::consts::FRAC_PI_2)
        })
        .collect();
    let c = theta.iter().map(|t| t.cos()).collect();
    let s = theta.iter().map(|t| t.sin()).collect();
    (c, s, theta)
}

/// Orthonormal polar factor rebuilt from QR factors: with `A = Q R` and
/// `H~ = Q_H R~`, `W = Q Q_H^*`.
#[derive(Debug, Clone)]
pub struct QrFix {
    pub factors: PolarFactors,
    /// `||R~ - R||_F / ||R||_F`
    pub r_agreement: f64,
    /// True when the agreement check failed and the SVD supplied the factors.
    pub fell_back: bool,
}

fn r_agreement_threshold(n: usize) -> f64 {
    R_AGREEMENT_CONSTANT * n.max(1) as f64 * UNIT_ROUNDOFF
}

/// Replaces the `W` of an interval-modified decomposition by `Q Q_H^*`.
/// `H` is kept. Falls back to the SVD factor `W` when the R factors disagree.
fn qr_fix_w(ai: &Matrix, modified: &PolarFactors) -> Result<QrFix> {
    let n = ai.ncols();
    let qa = qr_factor(ai)?;
    let qh = qr_factor(&modified.h)?;
    let rnorm = qa.r.frobenius_norm();
    let r_agreement = if rnorm == 0.0 {
        qh.r.frobenius_norm()
    } else {
        (&qh.r - &qa.r).frobenius_norm() / rnorm
    };
    let mut factors = modified.clone();
    factors.mode = crate::polar::PolarMode::Exact;
    let fell_back = r_agreement > r_agreement_threshold(n);
    factors.w = if fell_back {
        polar_svd(ai)?.w
    } else {
        qa.q.mul_adjoint(&qh.q)
    };
    Ok(QrFix {
        factors,
        r_agreement,
        fell_back,
    })
}

/// Polar decomposition of an ill-conditioned block: interval-modified
/// iteration, then `W` rebuilt from QR factors. Falls back to the SVD route
/// entirely when the R factors disagree.
pub fn polar_via_qr_fix(ai: &Matrix, epsilon: f64, method: PolarMethod) -> Result<QrFix> {
    let est = estimate_condition(ai)?;
    if est.ratio() >= epsilon {
        return Err(Error::Precondition(format!(
            "block is well conditioned (sigma_min / sigma_max ~ {:.3e} >= {epsilon:.1e})",
            est.ratio()
        )));
    }
    let modified = polar_modified(ai, epsilon, method)?;
    let mut fix = qr_fix_w(ai, &modified)?;
    if fix.fell_back {
        fix.factors = polar_svd(ai)?;
    }
    Ok(fix)
}

/// Rank estimates of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankEstimate {
    /// `nint(||A||_F^2)`, capped at `n`.
    pub frobenius: usize,
    /// Number of singular values of `R` (from `A = QR`) above `1e-8 ||A||_2`.
    pub eps_rank: usize,
}

pub fn estimate_rank(a: &Matrix) -> Result<RankEstimate> {
    let n = a.ncols();
    let f = a.frobenius_norm();
    let frobenius = ((f * f).round() as usize).min(n);
    let r = qr_factor(a)?.r;
    let sigma = singular_values(&r)?;
    let eps = RANK_CHECK_EPS * sigma.first().copied().unwrap_or(0.0);
    Ok(RankEstimate {
        frobenius,
        eps_rank: eps_rank_from_sigma(&sigma, eps, NormKind::Spectral),
    })
}

fn resolve_rank(a: &Matrix, mode: RankMode) -> Result<usize> {
    let n = a.ncols();
    match mode {
        RankMode::Full => Ok(n),
        RankMode::Deficient => Ok(estimate_rank(a)?.frobenius),
        RankMode::Auto => {
            let est = estimate_rank(a)?;
            if est.frobenius != est.eps_rank {
                return Err(Error::RankMismatch(format!(
                    "nint(||A||_F^2) = {} but epsilon-rank = {}",
                    est.frobenius, est.eps_rank
                )));
            }
            Ok(est.frobenius)
        }
    }
}

fn validate_input(a: &Matrix, m1: usize) -> Result<()> {
    let (m, n) = a.shape();
    if m1 < n || m < m1 + n {
        return Err(Error::DimensionMismatch(format!(
            "need m1 >= n and m - m1 >= n, got m = {m}, m1 = {m1}, n = {n}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument("input has non-finite entries".into()));
    }
    Ok(())
}

fn split_rows(a: &Matrix, m1: usize) -> (Matrix, Matrix) {
    (a.rows_range(0, m1), a.rows_range(m1, a.nrows() - m1))
}

struct BlockPolar {
    factors: PolarFactors,
    route: BlockRoute,
    r_agreement: Option<f64>,
}

fn full_rank_block(ai: &Matrix, opts: &CsdOptions) -> Result<BlockPolar> {
    if opts.polar_method == PolarMethod::Svd {
        return Ok(BlockPolar {
            factors: polar_svd(ai)?,
            route: BlockRoute::Svd,
            r_agreement: None,
        });
    }
    let est = estimate_condition(ai)?;
    if est.ratio() >= opts.epsilon {
        let params = default_params(opts.polar_method, est.ell)?;
        match polar_iterative(ai, params) {
            Ok(mut f) => {
                f.sigma_min_estimate = est.sigma_min;
                return Ok(BlockPolar {
                    factors: f,
                    route: BlockRoute::Iterative,
                    r_agreement: None,
                });
            }
            Err(Error::NoConvergence { .. }) => {
                return Ok(BlockPolar {
                    factors: polar_svd(ai)?,
                    route: BlockRoute::SvdFallback,
                    r_agreement: None,
                })
            }
            Err(e) => return Err(e),
        }
    }
    let fix = polar_via_qr_fix(ai, opts.epsilon, opts.polar_method)?;
    Ok(BlockPolar {
        route: if fix.fell_back { BlockRoute::SvdFallback } else { BlockRoute::QrFix },
        r_agreement: Some(fix.r_agreement),
        factors: fix.factors,
    })
}

fn rank_deficient_block(ai: &Matrix, opts: &CsdOptions) -> Result<BlockPolar> {
    if opts.polar_method == PolarMethod::Svd {
        return Ok(BlockPolar {
            factors: polar_svd(ai)?,
            route: BlockRoute::Svd,
            r_agreement: None,
        });
    }
    Ok(BlockPolar {
        factors: polar_modified(ai, opts.epsilon, opts.polar_method)?,
        route: BlockRoute::Modified,
        r_agreement: None,
    })
}

/// Angles, final `C`/`S`, and the ascending-angle reordering.
fn finish(
    mut res: CsdResult,
    opts: &CsdOptions,
    c: Vec<f64>,
    s: Vec<f64>,
) -> CsdResult {
    let (c, s, theta) = match opts.cs_extraction {
        CsExtraction::FromLambda if !opts.b_from_h1 => cs_from_lambda(&res.lambda),
        _ => {
            let (pc, ps, theta) = postprocess_trig(&c, &s);
            if opts.postprocess {
                (pc, ps, theta)
            } else {
                (c, s, theta)
            }
        }
    };
    res.c = c;
    res.s = s;
    res.theta = theta;
    let mut order: Vec<usize> = (0..res.theta.len()).collect();
    order.sort_by(|&i, &j| res.theta[i].total_cmp(&res.theta[j]));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        res.permute(&order);
    }
    res
}

fn csd_full_rank(a: &Matrix, m1: usize, opts: &CsdOptions) -> Result<CsdResult> {
    let n = a.ncols();
    let (a1, a2) = split_rows(a, m1);
    let (p1, p2) = rayon::join(|| full_rank_block(&a1, opts), || full_rank_block(&a2, opts));
    let (p1, p2) = (p1?, p2?);
    let (h1, h2) = (&p1.factors.h, &p2.factors.h);
    let b = if opts.b_from_h1 { h1.clone() } else { build_b(h1, h2, a, 0.0) };
    let eig = symeig(&b, opts.eig_method)?;
    let v1 = eig.v;
    let (u1, u2) = rayon::join(|| p1.factors.w.matmul(&v1), || p2.factors.w.matmul(&v1));
    let (c, s) = extract_cs(&v1, h1, h2);
    if let Some(j) = (0..n).find(|&j| c[j] * c[j] + s[j] * s[j] < 0.5) {
        return Err(Error::RankMismatch(format!(
            "full rank assumed but C^2 + S^2 = {:.3e} at index {j}",
            c[j] * c[j] + s[j] * s[j]
        )));
    }
    let ill = p1.route != BlockRoute::Iterative && p1.route != BlockRoute::Svd
        || p2.route != BlockRoute::Iterative && p2.route != BlockRoute::Svd;
    let res = CsdResult {
        u1,
        u2,
        c: Vec::new(),
        s: Vec::new(),
        v1,
        theta: Vec::new(),
        rank: n,
        mu: 0.0,
        branch: if ill { Branch::IllConditioned } else { Branch::FullRank },
        lambda: eig.lambda,
        routes: [p1.route, p2.route],
        r_agreement: [p1.r_agreement, p2.r_agreement],
    };
    Ok(finish(res, opts, c, s))
}

/// Economical CSD of a rank-deficient partial isometry (`k = r` columns).
pub fn csd_rank_deficient(a: &Matrix, m1: usize, rank: usize, opts: &CsdOptions) -> Result<CsdResult> {
    validate_input(a, m1)?;
    opts.validate()?;
    let (a1, a2) = split_rows(a, m1);
    let (p1, p2) = rayon::join(|| rank_deficient_block(&a1, opts), || rank_deficient_block(&a2, opts));
    let (mut p1, mut p2) = (p1?, p2?);
    let (h1, h2) = (p1.factors.h.clone(), p2.factors.h.clone());
    let mu = RANK_DEFICIENT_MU;
    let b = if opts.b_from_h1 { h1.clone() } else { build_b(&h1, &h2, a, mu) };
    let part = if opts.b_from_h1 {
        // H1 has the null space at 0, inside [-1, 1]; keep the top r pairs
        let e = symeig(&b, opts.eig_method)?;
        let n = e.lambda.len();
        let keep: Vec<usize> = (n - rank.min(n)..n).collect();
        crate::symeig::IntervalEig {
            v: e.v.select_cols(&keep),
            lambda: keep.iter().map(|&i| e.lambda[i]).collect(),
            splits: e.splits,
        }
    } else {
        symeig_interval(&b, -1.0 - EIGENVALUE_SLACK, 1.0 + EIGENVALUE_SLACK, opts.eig_method)?
    };
    if part.lambda.len() != rank {
        return Err(Error::RankMismatch(format!(
            "{} eigenvalues of B in [-1, 1], expected rank {rank}",
            part.lambda.len()
        )));
    }
    let v1 = part.v;
    let (c, s) = extract_cs(&v1, &h1, &h2);
    let (mut u1, mut u2) = rayon::join(|| p1.factors.w.matmul(&v1), || p2.factors.w.matmul(&v1));
    // W_i is not orthonormal off the active range. A block with an active
    // singular value below epsilon, or whose U_i lost orthogonality through
    // small active singular values, gets an orthonormal W from the QR factors.
    let mut ill = false;
    if opts.polar_method != PolarMethod::Svd {
        let recheck = ORTH_RECHECK_CONSTANT * a.ncols() as f64 * UNIT_ROUNDOFF;
        let small_c = c.iter().any(|&x| x < opts.epsilon) || u1.orthogonality_error_fro() > recheck;
        let small_s = s.iter().any(|&x| x < opts.epsilon) || u2.orthogonality_error_fro() > recheck;
        for (block, ai, u, flag) in [(&mut p1, &a1, &mut u1, small_c), (&mut p2, &a2, &mut u2, small_s)] {
            if flag {
                ill = true;
                let fix = qr_fix_w(ai, &block.factors)?;
                block.route = if fix.fell_back { BlockRoute::SvdFallback } else { BlockRoute::QrFix };
                block.r_agreement = Some(fix.r_agreement);
                block.factors.w = fix.factors.w;
                *u = block.factors.w.matmul(&v1);
            }
        }
    }
    let res = CsdResult {
        u1,
        u2,
        c: Vec::new(),
        s: Vec::new(),
        v1,
        theta: Vec::new(),
        rank,
        mu,
        branch: if ill {
            Branch::RankDeficientIllConditioned
        } else {
            Branch::RankDeficient
        },
        lambda: part.lambda,
        routes: [p1.route, p2.route],
        r_agreement: [p1.r_agreement, p2.r_agreement],
    };
    Ok(finish(res, opts, c, s))
}

/// CS decomposition of the partial isometry `A = [A1; A2]` with `A1` the
/// first `m1` rows.
pub fn csd(a: &Matrix, m1: usize, opts: &CsdOptions) -> Result<CsdResult> {
    validate_input(a, m1)?;
    opts.validate()?;
    let d = dist_to_partial_isometry(a)?;
    if d > D_GATE {
        return Err(Error::NotNearPartialIsometry {
            distance: d,
            limit: D_GATE,
        });
    }
    let rank = resolve_rank(a, opts.rank_mode)?;
    if rank < a.ncols() || opts.rank_mode == RankMode::Deficient {
        csd_rank_deficient(a, m1, rank, opts)
    } else {
        csd_full_rank(a, m1, opts)
    }
}

/// Complete 2x2 CSD of a unitary `A = [A1 A3; A2 A4]` with `n x n` blocks.
#[derive(Debug, Clone)]
pub struct Csd2x2 {
    pub left: CsdResult,
    pub v2: Matrix,
}

impl Csd2x2 {
    /// `[U1 0; 0 U2] [C -S; S C] [V1 0; 0 V2]^*`
    pub fn reconstruct(&self) -> Matrix {
        let r = &self.left;
        let n = r.v1.nrows();
        let scaled = |u: &Matrix, d: &[f64], sign: f64, v: &Matrix| {
            let mut x = u.clone();
            for (j, &dj) in d.iter().enumerate() {
                x.scale_col(j, C64::new(sign * dj, 0.0));
            }
            x.mul_adjoint(v)
        };
        let mut out = Matrix::zeros(2 * n, 2 * n);
        out.set_block(0, 0, &scaled(&r.u1, &r.c, 1.0, &r.v1));
        out.set_block(n, 0, &scaled(&r.u2, &r.s, 1.0, &r.v1));
        out.set_block(0, n, &scaled(&r.u1, &r.s, -1.0, &self.v2));
        out.set_block(n, n, &scaled(&r.u2, &r.c, 1.0, &self.v2));
        out
    }
}

pub fn csd_2x2(a: &Matrix, opts: &CsdOptions) -> Result<Csd2x2> {
    if !a.is_square() || !a.nrows().is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "csd_2x2 needs a 2n x 2n matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows() / 2;
    let defect = spectral_norm(&a.gram().shift_diag(-1.0));
    if defect > UNITARY_GATE {
        return Err(Error::Precondition(format!(
            "||A^*A - I||_2 = {defect:.3e} exceeds {UNITARY_GATE:.0e}"
        )));
    }
    let opts = CsdOptions {
        rank_mode: RankMode::Full,
        ..*opts
    };
    let left = csd(&a.cols_range(0, n), n, &opts)?;
    let a3 = a.submatrix(0, n, n, n);
    let a4 = a.submatrix(n, n, n, n);
    // X = -A3^* U1 S + A4^* U2 C
    let mut u1s = left.u1.clone();
    let mut u2c = left.u2.clone();
    for j in 0..n {
        u1s.scale_col(j, C64::new(left.s[j], 0.0));
        u2c.scale_col(j, C64::new(left.c[j], 0.0));
    }
    let x = a4.adjoint_mul(&u2c).axpby(1.0, &a3.adjoint_mul(&u1s), -1.0);
    let v2 = qr_factor(&x)?.q;
    Ok(Csd2x2 { left, v2 })
}
