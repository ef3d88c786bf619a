//! Seeded generators for the benchmark matrix classes.
//!
//! Every generator is a pure function of its dimensions and seed. The
//! stream is ChaCha8 with Box-Muller normals; draws are not meant to match
//! any other environment's random numbers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{qr_factor, Matrix, C64};

/// Amplitude of the perturbation used by the noisy classes.
pub const DEFAULT_NOISE_LEVEL: f64 = 1e-10;

/// Stream used for noise so that noisy and clean matrices share their
/// underlying draws.
const NOISE_STREAM: u64 = 1;

pub struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// `randn + i randn`
    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        let im = self.normal();
        C64::new(re, im)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.complex_normal())
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.rng);
    }
}

/// `nint(3n/4)`, the rank of the rank-deficient classes.
pub fn deficient_rank(n: usize) -> usize {
    (3.0 * n as f64 / 4.0).round() as usize
}

fn haar_from(g: &mut Gaussian, m: usize, n: usize) -> Matrix {
    // R has a nonnegative real diagonal, which makes Q exactly Haar.
    qr_factor(&g.matrix(m, n))
        .expect("tall Gaussian matrix")
        .q
}

/// Haar-distributed `m x n` matrix with orthonormal columns.
pub fn gen_haar_stiefel(m: usize, n: usize, seed: u64) -> Result<Matrix> {
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "Stiefel sample needs m >= n, got {m}x{n}"
        )));
    }
    Ok(haar_from(&mut Gaussian::new(seed), m, n))
}

/// Clustered angles: `theta = (pi/2) cumsum(delta_1..n) / sum(delta_1..n+1)`,
/// `delta_k = 10^(-18 rand)`.
fn clustered_angles(g: &mut Gaussian, n: usize) -> Vec<f64> {
    let delta: Vec<f64> = (0..=n).map(|_| 10f64.powf(-18.0 * g.uniform())).collect();
    let total: f64 = delta.iter().sum();
    let mut acc = 0.0;
    delta[..n]
        .iter()
        .map(|d| {
            acc += d;
            FRAC_PI_2 * acc / total
        })
        .collect()
}

/// `[U1 C V1^*; U2 S V1^*]`
pub fn assemble_csd(u1: &Matrix, u2: &Matrix, c: &[f64], s: &[f64], v1: &Matrix) -> Matrix {
    let mut uc = u1.clone();
    let mut us = u2.clone();
    for j in 0..c.len() {
        uc.scale_col(j, C64::new(c[j], 0.0));
        us.scale_col(j, C64::new(s[j], 0.0));
    }
    Matrix::vstack(&uc.mul_adjoint(v1), &us.mul_adjoint(v1))
}

/// Clustered test matrix together with the angles used to build it.
pub fn gen_clustered_with_angles(n: usize, seed: u64) -> Result<(Matrix, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InvalidArgument("clustered class needs n >= 2".into()));
    }
    let mut g = Gaussian::new(seed);
    let u1 = haar_from(&mut g, n, n);
    let u2 = haar_from(&mut g, n, n);
    let v1 = haar_from(&mut g, n, n);
    let theta = clustered_angles(&mut g, n);
    let c: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let s: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    Ok((assemble_csd(&u1, &u2, &c, &s, &v1), theta))
}

/// `2n x n` matrix `[U1 C V1^*; U2 S V1^*]` with heavily clustered angles.
pub fn gen_clustered(n: usize, seed: u64) -> Result<Matrix> {
    Ok(gen_clustered_with_angles(n, seed)?.0)
}

/// `A = X Y^*`, `X` Haar on `St(r, 2n)`, `Y` Haar on `St(r, n)`.
pub fn gen_rank_deficient_haar(n: usize, seed: u64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidArgument("rank-deficient class needs n >= 2".into()));
    }
    let r = deficient_rank(n);
    let mut g = Gaussian::new(seed);
    let x = haar_from(&mut g, 2 * n, r);
    let y = haar_from(&mut g, n, r);
    Ok(x.mul_adjoint(&y))
}

/// Clustered class with `C_ii = S_ii = 0` at `n - r` random indices.
pub fn gen_rank_deficient_clustered(n: usize, seed: u64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidArgument("rank-deficient class needs n >= 2".into()));
    }
    let r = deficient_rank(n);
    let mut g = Gaussian::new(seed);
    let u1 = haar_from(&mut g, n, n);
    let u2 = haar_from(&mut g, n, n);
    let v1 = haar_from(&mut g, n, n);
    let theta = clustered_angles(&mut g, n);
    let mut c: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let mut s: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    g.shuffle(&mut idx);
    for &i in &idx[..n - r] {
        c[i] = 0.0;
        s[i] = 0.0;
    }
    Ok(assemble_csd(&u1, &u2, &c, &s, &v1))
}

/// `A + level (G_re + i G_im)` with i.i.d. standard normal `G`.
pub fn add_noise(a: &Matrix, level: f64, seed: u64) -> Matrix {
    if level == 0.0 {
        return a.clone();
    }
    let mut g = Gaussian::with_stream(seed, NOISE_STREAM);
    let noise = g.matrix(a.nrows(), a.ncols());
    a.axpby(1.0, &noise, level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestClass {
    Haar = 1,
    Clustered = 2,
    RankDeficientHaar = 3,
    RankDeficientClustered = 4,
}

impl TestClass {
    pub const ALL: [TestClass; 4] = [
        TestClass::Haar,
        TestClass::Clustered,
        TestClass::RankDeficientHaar,
        TestClass::RankDeficientClustered,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::Haar),
            2 => Ok(Self::Clustered),
            3 => Ok(Self::RankDeficientHaar),
            4 => Ok(Self::RankDeficientClustered),
            _ => Err(Error::InvalidArgument(format!("unknown test class {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn is_rank_deficient(self) -> bool {
        matches!(self, Self::RankDeficientHaar | Self::RankDeficientClustered)
    }
}

/// Seeded descriptor of one benchmark matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub class: TestClass,
    pub noisy: bool,
    pub n: usize,
    pub seed: u64,
}

impl TestCase {
    pub fn new(class: TestClass, noisy: bool, n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("test size must be >= 2, got {n}")));
        }
        Ok(Self { class, noisy, n, seed })
    }

    /// Rank of the noiseless matrix.
    pub fn rank(&self) -> usize {
        if self.class.is_rank_deficient() {
            deficient_rank(self.n)
        } else {
            self.n
        }
    }

    /// The `2n x n` test matrix; row split is `m1 = n`.
    pub fn generate(&self) -> Result<Matrix> {
        let a = match self.class {
            TestClass::Haar => gen_haar_stiefel(2 * self.n, self.n, self.seed)?,
            TestClass::Clustered => gen_clustered(self.n, self.seed)?,
            TestClass::RankDeficientHaar => gen_rank_deficient_haar(self.n, self.seed)?,
            TestClass::RankDeficientClustered => gen_rank_deficient_clustered(self.n, self.seed)?,
        };
        Ok(if self.noisy {
            add_noise(&a, DEFAULT_NOISE_LEVEL, self.seed)
        } else {
            a
        })
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class.id(), if self.noisy { "'" } else { "" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{singular_values, Tolerance};

    #[test]
    fn haar_is_orthonormal_and_deterministic() {
        let a = gen_haar_stiefel(12, 5, 7).unwrap();
        assert!(a.orthogonality_error_fro() <= Tolerance::default().at(5));
        assert_eq!(a, gen_haar_stiefel(12, 5, 7).unwrap());
        assert_ne!(a, gen_haar_stiefel(12, 5, 8).unwrap());
    }

    #[test]
    fn haar_entry_power_sanity() {
        let n = 50;
        let a = gen_haar_stiefel(n, n, 3).unwrap();
        for j in 0..n {
            let mean: f64 = a.col(j).iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            assert!((mean - 1.0 / n as f64).abs() <= 5.0 / n as f64);
        }
        let row_mean: f64 = (0..n).map(|j| a[(0, j)].norm_sqr()).sum::<f64>();
        assert!((row_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clustered_angles_increase() {
        let (a, theta) = gen_clustered_with_angles(20, 11).unwrap();
        assert!(a.orthogonality_error_fro() <= Tolerance::default().at(20));
        // increments far below the running sum are absorbed by rounding
        assert!(theta.windows(2).all(|w| w[0] <= w[1]));
        assert!(*theta.last().unwrap() < FRAC_PI_2);
        assert!(theta[0] > 0.0);
    }

    #[test]
    fn rank_deficient_classes() {
        let tol = Tolerance::default();
        for (k, a) in [
            gen_rank_deficient_haar(16, 5).unwrap(),
            gen_rank_deficient_clustered(16, 5).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let r = deficient_rank(16);
            assert_eq!(r, 12);
            let res = (&a.matmul(&a.gram()) - a).frobenius_norm();
            assert!(res <= tol.at(16), "class {} residual {res}", k + 3);
            let fro2 = a.frobenius_norm().powi(2);
            assert!((fro2 - r as f64).abs() <= 10.0 * 16.0 * crate::UNIT_ROUNDOFF);
            let s = singular_values(a).unwrap();
            assert_eq!(s.iter().filter(|&&x| x > 1e-8).count(), r);
        }
    }

    #[test]
    fn noise_scale() {
        let a = gen_haar_stiefel(20, 10, 1).unwrap();
        assert_eq!(add_noise(&a, 0.0, 1), a);
        let level = 1e-10;
        let d = (&add_noise(&a, level, 1) - &a).frobenius_norm();
        let expect = level * (2.0 * 20.0 * 10.0f64).sqrt();
        assert!(d > expect / 2.0 && d < expect * 2.0);
    }

    #[test]
    fn nint_rounding() {
        assert_eq!(deficient_rank(30), 23);
        assert_eq!(deficient_rank(42), 32);
        assert_eq!(deficient_rank(2), 2);
        assert_eq!(deficient_rank(20), 15);
    }

    #[test]
    fn case_display_and_rank() {
        let c = TestCase::new(TestClass::RankDeficientHaar, true, 20, 1).unwrap();
        assert_eq!(c.to_string(), "3'");
        assert_eq!(c.rank(), 15);
        assert!(TestCase::new(TestClass::Haar, false, 1, 1).is_err());
    }
}
