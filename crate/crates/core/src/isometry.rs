//! Partial-isometry measurements: distance to the set of partial
//! isometries, epsilon-rank, the two perturbation lemmas for approximate
//! partial isometries, and the residual/orthogonality report of a CSD.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csd::CsdResult;
use crate::error::{Error, Result};
use crate::kernel::{singular_values, spectral_norm, Matrix, UNIT_ROUNDOFF};
use crate::polar::canonical_polar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Spectral,
    Frobenius,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Spectral => "spectral",
            NormKind::Frobenius => "frobenius",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" | "2" => Ok(NormKind::Spectral),
            "frobenius" | "fro" | "F" => Ok(NormKind::Frobenius),
            other => Err(Error::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

pub fn norm(a: &Matrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Spectral => spectral_norm(a),
        NormKind::Frobenius => a.frobenius_norm(),
    }
}

/// `max_i min(sigma_i, |1 - sigma_i|)`, the spectral-norm distance to the
/// nearest partial isometry.
pub fn dist_to_partial_isometry(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?
        .into_iter()
        .map(|s| s.min((1.0 - s).abs()))
        .fold(0.0, f64::max))
}

/// Smallest rank of a matrix within `eps` of `a` in the given norm.
pub fn eps_rank(a: &Matrix, eps: f64, kind: NormKind) -> Result<usize> {
    if eps < 0.0 {
        return Err(Error::InvalidArgument(format!("eps = {eps} is negative")));
    }
    let sigma = singular_values(a)?;
    Ok(eps_rank_from_sigma(&sigma, eps, kind))
}

/// As [`eps_rank`], from nonincreasing singular values.
pub fn eps_rank_from_sigma(sigma: &[f64], eps: f64, kind: NormKind) -> usize {
    match kind {
        NormKind::Spectral => sigma.iter().filter(|&&s| s > eps).count(),
        NormKind::Frobenius => {
            // tail[r] = sqrt(sum_{i >= r} sigma_i^2)
            let mut tail = 0.0f64;
            let mut r = sigma.len();
            for (i, s) in sigma.iter().enumerate().rev() {
                let next = (tail * tail + s * s).sqrt();
                if next > eps {
                    break;
                }
                tail = next;
                r = i;
            }
            r
        }
    }
}

/// `||A A^* A - A||`
pub fn isometry_defect(a: &Matrix, kind: NormKind) -> f64 {
    let aaa = a.matmul(&a.adjoint_mul(a));
    norm(&(&aaa - a), kind)
}

/// The three sides of the exact-rank sandwich
/// `||AA^*A - A|| / (s1 (1 + s1)) <= ||A - U|| <= ||AA^*A - A|| / (sr (1 + sr))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaSandwich {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub rank: usize,
}

/// Rounding allowance `10 max(m, n) u` for comparing the three sides; the
/// bounds are attained whenever the extreme `|1 - sigma_i|` sits at `s1` or `sr`.
pub fn sandwich_slack(m: usize, n: usize) -> f64 {
    10.0 * m.max(n) as f64 * UNIT_ROUNDOFF
}

impl LemmaSandwich {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.middle + slack && self.middle <= self.upper + slack
    }
}

/// Relative threshold below which singular values count as exact zeros.
fn exact_rank_tol(sigma: &[f64], m: usize, n: usize) -> f64 {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    1e2 * m.max(n) as f64 * UNIT_ROUNDOFF * s1
}

/// Evaluates the sandwich for `A = U H` (canonical polar factor `U`).
pub fn lemma22_check(a: &Matrix, kind: NormKind) -> Result<LemmaSandwich> {
    let sigma = singular_values(a)?;
    let tol = exact_rank_tol(&sigma, a.nrows(), a.ncols());
    let cp = canonical_polar(a, tol)?;
    let defect = isometry_defect(a, kind);
    let r = cp.rank;
    if r == 0 {
        return Ok(LemmaSandwich {
            lower: 0.0,
            middle: 0.0,
            upper: 0.0,
            rank: 0,
        });
    }
    let (s1, sr) = (sigma[0], sigma[r - 1]);
    Ok(LemmaSandwich {
        lower: defect / (s1 * (1.0 + s1)),
        middle: norm(&(a - &cp.u), kind),
        upper: defect / (sr * (1.0 + sr)),
        rank: r,
    })
}

/// Bound on the distance from `A` to a partial isometry of rank
/// `eps_rank(A)`, together with the distance attained by the canonical
/// polar factor of the truncated SVD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearbyIsometryBound {
    pub bound: f64,
    pub achieved: f64,
    pub rank: usize,
}

pub fn lemma23_bound(a: &Matrix, eps: f64, kind: NormKind) -> Result<NearbyIsometryBound> {
    let sigma = singular_values(a)?;
    let r = eps_rank_from_sigma(&sigma, eps, kind);
    if r == 0 || sigma[r - 1] == 0.0 {
        return Err(Error::Precondition(format!(
            "epsilon-rank {r} leaves no positive singular value"
        )));
    }
    let (s1, sr) = (sigma[0], sigma[r - 1]);
    let defect = isometry_defect(a, kind);
    let bound = eps + (defect + eps * (1.0 + 3.0 * s1 * s1)) / (sr * (1.0 + sr));
    // canonical polar factor of the rank-r truncation
    let threshold = if r < sigma.len() {
        0.5 * (sigma[r - 1] + sigma[r])
    } else {
        0.5 * sigma[r - 1]
    };
    let cp = canonical_polar(a, threshold)?;
    Ok(NearbyIsometryBound {
        bound,
        achieved: norm(&(a - &cp.u), kind),
        rank: r,
    })
}

/// Residual and orthogonality measures of a computed CSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `||A_hat - A||_2`
    pub residual_2norm: f64,
    pub d_of_a: f64,
    /// `residual / max(d(A), u)`
    pub scaled_residual: f64,
    /// `||U1^* U1 - I||_2 / u`
    pub orth_u1: f64,
    pub orth_u2: f64,
    pub orth_v1: f64,
    /// `||C^2 + S^2 - I_k||_2`
    pub cs_identity_err: f64,
}

impl StabilityReport {
    pub fn is_finite(&self) -> bool {
        [
            self.residual_2norm,
            self.d_of_a,
            self.scaled_residual,
            self.orth_u1,
            self.orth_u2,
            self.orth_v1,
            self.cs_identity_err,
        ]
        .iter()
        .all(|x| x.is_finite() && *x >= 0.0)
    }
}

pub fn stability_report(a: &Matrix, result: &CsdResult) -> Result<StabilityReport> {
    let a_hat = result.reconstruct();
    if a_hat.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "result reconstructs a {}x{} matrix, input is {}x{}",
            a_hat.nrows(),
            a_hat.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let residual = spectral_norm(&(&a_hat - a));
    let d = dist_to_partial_isometry(a)?;
    let orth = |m: &Matrix| {
        if m.ncols() == 0 {
            0.0
        } else {
            m.orthogonality_error() / UNIT_ROUNDOFF
        }
    };
    let cs_identity_err = result
        .c
        .iter()
        .zip(&result.s)
        .map(|(c, s)| (c * c + s * s - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(StabilityReport {
        residual_2norm: residual,
        d_of_a: d,
        scaled_residual: residual / d.max(UNIT_ROUNDOFF),
        orth_u1: orth(&result.u1),
        orth_u2: orth(&result.u2),
        orth_v1: orth(&result.v1),
        cs_identity_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(dist_to_partial_isometry(&Matrix::identity(3)).unwrap(), 0.0);
        let d = dist_to_partial_isometry(&Matrix::from_real_diag(&[1.0, 0.5, 0.3])).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eps_rank_examples() {
        let a = Matrix::from_real_diag(&[1.0, 1.0, 0.0]);
        assert_eq!(eps_rank(&a, 0.5, NormKind::Spectral).unwrap(), 2);
        assert_eq!(eps_rank(&a, 1.0, NormKind::Spectral).unwrap(), 0);
        assert_eq!(eps_rank(&a, 2.0, NormKind::Frobenius).unwrap(), 0);
        assert_eq!(eps_rank_from_sigma(&[3.0, 0.1, 0.1], 0.15, NormKind::Frobenius), 1);
        assert_eq!(eps_rank_from_sigma(&[3.0, 0.1, 0.1], 0.14, NormKind::Frobenius), 2);
    }

    #[test]
    fn sandwich_diag() {
        let a = Matrix::from_real_diag(&[1.1, 0.9]);
        let s = lemma22_check(&a, NormKind::Spectral).unwrap();
        assert!((s.middle - 0.1).abs() < 1e-14);
        assert!(s.holds(1e-15));
        let s = lemma22_check(&a, NormKind::Frobenius).unwrap();
        assert!(s.holds(1e-15));
    }

    #[test]
    fn sandwich_on_partial_isometry() {
        let a = Matrix::from_real_diag(&[1.0, 1.0, 0.0]);
        let s = lemma22_check(&a, NormKind::Spectral).unwrap();
        assert_eq!(s.rank, 2);
        assert!(s.lower <= 1e2 * UNIT_ROUNDOFF && s.middle <= 1e2 * UNIT_ROUNDOFF && s.upper <= 1e2 * UNIT_ROUNDOFF);
    }

    #[test]
    fn nearby_bound_examples() {
        let a = Matrix::from_real_diag(&[1.0, 1e-12]);
        let b = lemma23_bound(&a, 1e-10, NormKind::Spectral).unwrap();
        assert_eq!(b.rank, 1);
        assert!(b.bound >= 1e-12);
        assert!((b.achieved - 1e-12).abs() < 1e-20);
        let b = lemma23_bound(&Matrix::identity(2), 0.0, NormKind::Spectral).unwrap();
        assert!(b.bound <= 1e2 * UNIT_ROUNDOFF && b.achieved <= b.bound + 1e-16);
        assert!(lemma23_bound(&Matrix::zeros(2, 2), 0.1, NormKind::Spectral).is_err());
    }
}
