//! Scalar rational approximations of the sign function on `[ell, 1]`.
//!
//! A [`SignApprox`] is the exact sequence of odd rational maps that the
//! matrix iterations apply to the singular values, so evaluating it on a
//! scalar predicts what the matrix iteration does to each singular value.

use serde::{Deserialize, Serialize};

use super::elliptic::{ellipj, ellipk_from_complement};
use crate::error::{Error, Result};
use crate::kernel::UNIT_ROUNDOFF;

pub const MAX_P: usize = 8;
/// Smallest lower endpoint accepted; tiny enough for any double-precision use.
pub const MIN_ELL: f64 = 1e-30;

/// Unevaluated sum `hi + lo` of two doubles; used so the scalar maps are
/// evaluated to well below the approximation error they are tested for.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Self::new(-q1)));
        let q2 = r.hi / o.hi;
        Self::renorm(q1, q2)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `p = 1` is the dynamically weighted Halley (QDWH) family, `p >= 2` the
/// composed Zolotarev family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignApproxParams {
    pub p: usize,
    pub ell: f64,
    pub iterations: usize,
}

impl SignApproxParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_P).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} outside [1, 8]", self.p)));
        }
        if !(self.ell > 0.0 && self.ell <= 1.0) {
            return Err(Error::InvalidArgument(format!("ell = {} outside (0, 1]", self.ell)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Dynamically weighted Halley step `x (a + b x^2) / (1 + c x^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalleyStep {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HalleyStep {
    /// Weights that map `[ell, 1]` optimally into `[ell', 1]`.
    pub fn for_ell(ell: f64) -> Self {
        let ell = ell.max(MIN_ELL);
        if 1.0 - ell <= 10.0 * UNIT_ROUNDOFF {
            return Self { a: 3.0, b: 1.0, c: 3.0 };
        }
        let l2 = ell * ell;
        let gamma = (4.0 * (1.0 - l2) / (l2 * l2)).cbrt();
        let sg = (1.0 + gamma).sqrt();
        let a = sg + 0.5 * (8.0 - 4.0 * gamma + 8.0 * (2.0 - l2) / (l2 * sg)).sqrt();
        let b = (a - 1.0) * (a - 1.0) / 4.0;
        Self { a, b, c: a + b - 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_dd(Dd::new(x)).to_f64()
    }

    fn eval_dd(&self, x: Dd) -> Dd {
        let (a, b, c) = (Dd::new(self.a), Dd::new(self.b), Dd::new(self.c));
        let x2 = x.mul(x);
        x.mul(a.add(b.mul(x2))).div(Dd::new(1.0).add(c.mul(x2)))
    }

    /// Image of the lower endpoint.
    pub fn next_ell(&self, ell: f64) -> f64 {
        (ell * (self.a + self.b * ell * ell) / (1.0 + self.c * ell * ell)).min(1.0)
    }
}

/// One Zolotarev step in partial-fraction form
/// `scale * x * (1 + sum_j weights_j / (x^2 + poles_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoloStep {
    pub scale: f64,
    /// `c_{2j-1}`, the shifts of the `p` partial fractions.
    pub poles: Vec<f64>,
    pub weights: Vec<f64>,
    /// `c_{2j}`, kept for the product form.
    pub zeros: Vec<f64>,
}

impl ZoloStep {
    /// Unnormalized type `(2p+1, 2p)` Zolotarev function for `[ell, 1]`.
    pub fn unnormalized(p: usize, ell: f64) -> Self {
        let ell = ell.clamp(MIN_ELL, 1.0);
        let kp = ell;
        let k = (1.0 - ell * ell).sqrt();
        let big_k = ellipk_from_complement(kp);
        let denom = (2 * p + 1) as f64;
        let coeff: Vec<f64> = (1..=2 * p)
            .map(|i| {
                let u = i as f64 * big_k / denom;
                if u <= 0.5 * big_k {
                    let (sn, cn, _) = ellipj(u, k, kp);
                    ell * ell * (sn / cn) * (sn / cn)
                } else {
                    // sn(u)/cn(u) = cn(v) / (ell sn(v)) with v = K - u
                    let (sn, cn, _) = ellipj(big_k - u, k, kp);
                    (cn / sn) * (cn / sn)
                }
            })
            .collect();
        let poles: Vec<f64> = coeff.iter().step_by(2).copied().collect();
        let zeros: Vec<f64> = coeff.iter().skip(1).step_by(2).copied().collect();
        let weights = (0..p)
            .map(|j| {
                let cj = poles[j];
                let num: f64 = zeros.iter().map(|&z| z - cj).product();
                let den: f64 = poles
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &q)| q - cj)
                    .product();
                num / den
            })
            .collect();
        Self {
            scale: 1.0,
            poles,
            weights,
            zeros,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_dd(Dd::new(x)).to_f64()
    }

    fn eval_dd(&self, x: Dd) -> Dd {
        let x2 = x.mul(x);
        let s = self
            .weights
            .iter()
            .zip(&self.poles)
            .fold(Dd::new(1.0), |acc, (&w, &c)| acc.add(Dd::new(w).div(x2.add(Dd::new(c)))));
        Dd::new(self.scale).mul(x).mul(s)
    }

    /// Maximum on `[ell, 1]` of the map as evaluated.
    fn max_on(&self, ell: f64) -> f64 {
        let pts = 400;
        let lo = ell.ln();
        let mut best_t = 0.0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=pts {
            let t = lo * (1.0 - i as f64 / pts as f64);
            let v = self.eval(t.exp());
            if v > best {
                best = v;
                best_t = t;
            }
        }
        // golden-section refinement in log-space around the best sample
        let h = -lo / pts as f64;
        let (mut a, mut b) = ((best_t - h).max(lo), (best_t + h).min(0.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if self.eval(x1.exp()) < self.eval(x2.exp()) {
                a = x1;
            } else {
                b = x2;
            }
        }
        best.max(self.eval((0.5 * (a + b)).exp()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignStep {
    Halley(HalleyStep),
    Zolo(ZoloStep),
}

impl SignStep {
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_dd(Dd::new(x)).to_f64()
    }

    fn eval_dd(&self, x: Dd) -> Dd {
        match self {
            SignStep::Halley(h) => h.eval_dd(x),
            SignStep::Zolo(z) => z.eval_dd(x),
        }
    }
}

/// A composed rational approximation of `sign(x)` together with the lower
/// endpoint seen by each step.
#[derive(Debug, Clone, PartialEq)]
pub struct SignApprox {
    pub params: SignApproxParams,
    pub steps: Vec<SignStep>,
    /// `ells[k]` is the lower interval endpoint entering step `k`.
    pub ells: Vec<f64>,
}

impl SignApprox {
    pub fn new(params: SignApproxParams) -> Result<Self> {
        params.validate()?;
        let mut steps = Vec::with_capacity(params.iterations);
        let mut ells = Vec::with_capacity(params.iterations);
        let mut ell = params.ell.max(MIN_ELL);
        for _ in 0..params.iterations {
            ells.push(ell);
            if params.p == 1 {
                let h = HalleyStep::for_ell(ell);
                ell = h.next_ell(ell);
                steps.push(SignStep::Halley(h));
            } else {
                let mut z = ZoloStep::unnormalized(params.p, ell);
                // dividing by the maximum keeps the image of [0, 1] inside [0, 1]
                z.scale = 1.0 / z.max_on(ell);
                ell = z.eval(ell).min(1.0);
                steps.push(SignStep::Zolo(z));
            }
        }
        Ok(Self { params, steps, ells })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.steps.iter().fold(Dd::new(x), |acc, s| s.eval_dd(acc)).to_f64()
    }

    /// `max |1 - r(x)|` over `points` log-spaced samples of `[ell, 1]`.
    pub fn max_error_on(&self, ell: f64, points: usize) -> f64 {
        let lo = ell.ln();
        (0..points)
            .map(|i| {
                let t = if points == 1 { 0.0 } else { lo * (1.0 - i as f64 / (points - 1) as f64) };
                (1.0 - self.eval(t.exp())).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `r(x)` for the composed map the matrix iterations apply.
pub fn eval_sign_approx(x: f64, params: &SignApproxParams) -> Result<f64> {
    Ok(SignApprox::new(*params)?.eval(x))
}

/// Grid size for the convergence test on `[ell, 1]`.
pub const GRID_POINTS: usize = 10_000;
/// A map "converges" when it is within this distance of 1 on the grid.
pub const GRID_TOLERANCE: f64 = 1e-15;

/// Smallest `p` whose two-step composed map passes the grid test on
/// `[ell, 1]`; `MAX_P` if none does.
pub fn choose_p(ell: f64) -> usize {
    for p in 1..=MAX_P {
        let params = SignApproxParams { p, ell, iterations: 2 };
        if let Ok(r) = SignApprox::new(params) {
            if r.max_error_on(ell, GRID_POINTS) <= GRID_TOLERANCE {
                return p;
            }
        }
    }
    MAX_P
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_maps_to_one() {
        for &(p, ell, it) in &[(1, 1e-3, 6), (3, 1e-2, 2), (8, 1e-3, 2), (8, 1e-15, 2), (1, 1e-15, 6)] {
            let r = eval_sign_approx(1.0, &SignApproxParams { p, ell, iterations: it }).unwrap();
            assert!((r - 1.0).abs() <= 10.0 * UNIT_ROUNDOFF, "p={p} ell={ell}: {r}");
        }
    }

    #[test]
    fn odd_exactly() {
        for &p in &[1, 4, 8] {
            let params = SignApproxParams { p, ell: 1e-3, iterations: 2 };
            for &x in &[0.1, 0.5, 1.0] {
                let a = eval_sign_approx(x, &params).unwrap();
                let b = eval_sign_approx(-x, &params).unwrap();
                assert_eq!(a, -b);
            }
        }
    }

    #[test]
    fn dense_grid_p8_two_steps() {
        let r = SignApprox::new(SignApproxParams { p: 8, ell: 1e-3, iterations: 2 }).unwrap();
        // linear grid (the log grid is covered by max_error_on)
        let n = 10_000;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = 1e-3 + (1.0 - 1e-3) * i as f64 / (n - 1) as f64;
            worst = worst.max((1.0 - r.eval(x)).abs());
        }
        assert!(worst <= 1e-15, "{worst}");
        assert!(r.max_error_on(1e-3, GRID_POINTS) <= 1e-15);
    }

    #[test]
    fn zolotarev_p1_matches_halley_weights() {
        // Type (3,2) Zolotarev and dynamically weighted Halley coincide up to scale.
        for &ell in &[0.9, 0.3, 1e-2, 1e-6] {
            let z = ZoloStep::unnormalized(1, ell);
            let h = HalleyStep::for_ell(ell);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            assert!(rel(z.poles[0], 1.0 / h.c) < 1e-9, "ell {ell}: {} vs {}", z.poles[0], 1.0 / h.c);
            assert!(rel(z.zeros[0], h.a / h.b) < 1e-9, "ell {ell}");
        }
    }

    #[test]
    fn image_of_unit_interval_bounded() {
        for &(p, ell, it) in &[(1, 1e-15, 6), (8, 1e-15, 2), (5, 1e-8, 2)] {
            let r = SignApprox::new(SignApproxParams { p, ell, iterations: it }).unwrap();
            for i in 0..=2000 {
                let x = i as f64 / 2000.0;
                let y = r.eval(x);
                assert!((0.0..=1.0 + 10.0 * UNIT_ROUNDOFF).contains(&y), "x={x} y={y}");
                let xs = 1e-18 * i as f64;
                assert!(r.eval(xs) >= 0.0);
            }
        }
    }

    #[test]
    fn qdwh_six_steps_from_machine_epsilon() {
        let r = SignApprox::new(SignApproxParams { p: 1, ell: 1e-15, iterations: 6 }).unwrap();
        assert!(r.max_error_on(1e-15, 2000) <= 1e-15);
    }

    #[test]
    fn chosen_p_grows_with_condition() {
        let p_easy = choose_p(0.5);
        let p_mid = choose_p(1e-4);
        let p_hard = choose_p(1e-15);
        assert!(p_easy <= p_mid && p_mid <= p_hard);
        assert_eq!(p_hard, MAX_P);
        // at the edge of the family the map converges up to evaluation rounding
        let r = SignApprox::new(SignApproxParams { p: p_hard, ell: 1e-15, iterations: 2 }).unwrap();
        assert!(r.max_error_on(1e-15, 2000) <= 40.0 * UNIT_ROUNDOFF);
    }

    #[test]
    fn invalid_params() {
        assert!(eval_sign_approx(0.5, &SignApproxParams { p: 9, ell: 0.1, iterations: 2 }).is_err());
        assert!(eval_sign_approx(0.5, &SignApproxParams { p: 2, ell: 0.0, iterations: 2 }).is_err());
    }
}
