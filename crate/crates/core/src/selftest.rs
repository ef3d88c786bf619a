//! Acceptance checks at desk scale. Each criterion is evaluated at its fixed
//! tolerance and reported with the worst observed value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{default_sizes, run_case, BenchRow};
use crate::csd::{csd, csd_2x2, CsdOptions};
use crate::error::Result;
use crate::isometry::{lemma22_check, sandwich_slack, lemma23_bound, NormKind};
use crate::kernel::{spectral_norm, Matrix, C64, UNIT_ROUNDOFF as U};
use crate::polar::{polar, polar_modified, polar_svd, PolarMethod, DEFAULT_EPSILON};
use crate::symeig::{symeig_direct, symeig_sdc};
use crate::testgen::{add_noise, gen_clustered, gen_haar_stiefel, Gaussian, TestCase, TestClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestConfig {
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<PolarMethod>,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            sizes: default_sizes(5),
            seeds: vec![1, 2, 3],
            methods: PolarMethod::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u8, title: &str, passed: bool, detail: String) -> Self {
        Self {
            id,
            title: title.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(id: u8, title: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(id, title, passed, detail),
            Err(e) => Self::new(id, title, false, format!("error: {e}")),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {}: {} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

/// Largest off-diagonal magnitude of `V^* H V`.
fn projected_off_diag(v: &Matrix, h: &Matrix) -> f64 {
    v.adjoint_mul(h).matmul(v).max_off_diag()
}

fn with_spectrum(h_diag: &[f64], v: &Matrix) -> Matrix {
    let mut vd = v.clone();
    for (j, &x) in h_diag.iter().enumerate() {
        vd.scale_col(j, C64::new(x, 0.0));
    }
    vd.mul_adjoint(v)
}

/// Small-angle experiment: eigenvectors from `H2 - H1` versus from `H1`.
pub fn criterion_small_angles() -> Result<(bool, String)> {
    let theta = [1e-8f64, 2e-8, 3e-8];
    let c: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let s: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let v = Matrix::from_real_rows(&[&[2.0, -1.0, 2.0], &[2.0, 2.0, -1.0], &[1.0, -2.0, -2.0]])
        .scale_real(1.0 / 3.0);
    let h1 = with_spectrum(&c, &v);
    let h2 = with_spectrum(&s, &v);
    let good = projected_off_diag(&symeig_direct(&(&h2 - &h1).hermitian_part())?.v, &h2);
    let bad = projected_off_diag(&symeig_direct(&h1.hermitian_part())?.v, &h2);
    Ok((
        good <= 1e-15 && bad >= 1e-10,
        format!("eig(H2-H1): {good:.2e} <= 1e-15, eig(H1): {bad:.2e} >= 1e-10"),
    ))
}

fn grid_rows(classes: &[TestClass], noisy: bool, cfg: &SelftestConfig) -> Result<Vec<(PolarMethod, BenchRow)>> {
    let mut jobs = Vec::new();
    for &method in &cfg.methods {
        for &class in classes {
            for &n in &cfg.sizes {
                for &seed in &cfg.seeds {
                    jobs.push((method, TestCase::new(class, noisy, n, seed)?));
                }
            }
        }
    }
    jobs.par_iter()
        .map(|(method, case)| Ok((*method, run_case(case, &CsdOptions::with_method(*method))?)))
        .collect()
}

type Metric = dyn Fn(&BenchRow) -> (f64, f64);

/// Worst `value / limit` over rows, with the offending row.
fn worst(
    rows: &[(PolarMethod, BenchRow)],
    f: impl Fn(&BenchRow) -> (f64, f64),
) -> Option<(f64, &(PolarMethod, BenchRow))> {
    rows.iter()
        .map(|r| {
            let (v, limit) = f(&r.1);
            (v / limit, r)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
}

fn check_rows(rows: &[(PolarMethod, BenchRow)], rank_deficient: bool) -> (bool, String) {
    let mut passed = true;
    let mut detail = Vec::new();
    let orth = |r: &BenchRow| (r.orth_u1.max(r.orth_u2).max(r.orth_v1), 50.0 * r.n as f64);
    let resid = |r: &BenchRow| {
        if r.noisy {
            (r.residual / r.d_of_a, 10.0)
        } else {
            (r.residual, 50.0 * r.n as f64 * U)
        }
    };
    let mut checks: Vec<(&str, Box<Metric>)> =
        vec![("orth/(50n)", Box::new(orth)), ("residual/limit", Box::new(resid))];
    if rank_deficient {
        checks.push(("cs/(1e2 u)", Box::new(|r: &BenchRow| (r.cs_identity_err, 1e2 * U))));
    }
    for (name, f) in &checks {
        if let Some((ratio, (m, r))) = worst(rows, f) {
            passed &= ratio <= 1.0;
            detail.push(format!("{name} max {ratio:.3} at {m} class {} n={} seed={}", r.label(), r.n, r.seed));
        }
    }
    if rank_deficient {
        let bad_k = rows
            .iter()
            .filter(|(_, r)| r.k != crate::testgen::deficient_rank(r.n))
            .count();
        passed &= bad_k == 0;
        detail.push(format!("k != nint(3n/4) in {bad_k} runs"));
    }
    detail.push(format!("{} runs", rows.len()));
    (passed, detail.join("; "))
}

fn criterion_grid(classes: &[TestClass], rank_deficient: bool, cfg: &SelftestConfig) -> Result<(bool, String)> {
    let mut rows = grid_rows(classes, false, cfg)?;
    rows.extend(grid_rows(classes, true, cfg)?);
    Ok(check_rows(&rows, rank_deficient))
}

/// Full-rank classes and their noisy variants.
pub fn criterion_full_rank(cfg: &SelftestConfig) -> Result<(bool, String)> {
    criterion_grid(&[TestClass::Haar, TestClass::Clustered], false, cfg)
}

/// Rank-deficient classes and their noisy variants.
pub fn criterion_rank_deficient(cfg: &SelftestConfig) -> Result<(bool, String)> {
    criterion_grid(&[TestClass::RankDeficientHaar, TestClass::RankDeficientClustered], true, cfg)
}

/// Diagonalizing `H1` alone loses the eigenvectors of `H2`.
pub fn criterion_instability_witness() -> Result<(bool, String)> {
    let n = 30;
    let opts = CsdOptions {
        b_from_h1: true,
        ..CsdOptions::default()
    };
    let mut best = (0.0f64, 0);
    for seed in 1..=10u64 {
        let a = gen_clustered(n, seed)?;
        let h2 = polar_svd(&a.rows_range(n, n))?.h;
        let v1 = csd(&a, n, &opts)?.v1;
        let p = v1.adjoint_mul(&h2).matmul(&v1);
        let off = &p - &Matrix::from_diag(&p.diag());
        let ratio = spectral_norm(&off) / (U * spectral_norm(&h2));
        if ratio > best.0 {
            best = (ratio, seed);
        }
    }
    Ok((
        best.0 >= 1e3,
        format!("max ||V^*H2V - diag|| / (u ||H2||) = {:.2e} at seed {} (need >= 1e3)", best.0, best.1),
    ))
}

fn geometric(n: usize, kappa: f64) -> Vec<f64> {
    (0..n)
        .map(|i| kappa.powf(-(i as f64) / (n.max(2) - 1) as f64))
        .collect()
}

fn with_singular_values(m: usize, sigma: &[f64], seed: u64) -> Result<Matrix> {
    let n = sigma.len();
    let mut p = gen_haar_stiefel(m, n, seed)?;
    let q = gen_haar_stiefel(n, n, seed ^ 0x9e37_79b9)?;
    for (j, &s) in sigma.iter().enumerate() {
        p.scale_col(j, C64::new(s, 0.0));
    }
    Ok(p.mul_adjoint(&q))
}

/// Polar residual, iteration count and the interval-modified contract.
pub fn criterion_polar() -> Result<(bool, String)> {
    let results: Vec<Result<[f64; 4]>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let n = 5 + (i as usize * 7) % 36;
            let kappa = 10f64.powf(8.0 * i as f64 / 49.0);
            let a = with_singular_values(n + (i as usize % 4), &geometric(n, kappa), 1000 + i)?;
            let nf = n as f64;
            let mut resid = 0.0f64;
            let mut qdwh_iters = 0usize;
            for method in PolarMethod::ALL {
                let f = polar(&a, method)?;
                resid = resid.max(f.residual(&a) / (50.0 * nf * U * a.frobenius_norm()));
                if method == PolarMethod::Qdwh {
                    qdwh_iters = f.iterations;
                }
            }
            let h = polar_svd(&a)?.h;
            let mut modified = 0.0f64;
            for method in [PolarMethod::Qdwh, PolarMethod::Zolo] {
                let f = polar_modified(&a, DEFAULT_EPSILON, method)?;
                let dh = spectral_norm(&(&f.h - &h));
                let dwh = spectral_norm(&(&f.w.matmul(&f.h) - &a));
                modified = modified.max(dh.max(dwh) / (1e3 * U));
            }
            Ok([resid, qdwh_iters as f64, modified, kappa])
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let max = |k: usize| results.iter().map(|r| r[k]).fold(0.0, f64::max);
    let (resid, iters, modified) = (max(0), max(1), max(2));
    Ok((
        resid <= 1.0 && iters <= 6.0 && modified <= 1.0,
        format!(
            "residual/(50nu||A||_F) max {resid:.3}; qdwh iterations max {iters}; modified/(1e3u) max {modified:.3}; 50 instances, kappa 1..{:.0e}",
            max(3)
        ),
    ))
}

/// Divide-and-conquer eigensolver against the Jacobi oracle.
pub fn criterion_symeig() -> Result<(bool, String)> {
    let results: Vec<Result<(f64, f64)>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let n = 2 + 2 * i as usize;
            let b = Gaussian::new(5000 + i).matrix(n, n).hermitian_part();
            let sdc = symeig_sdc(&b)?;
            let direct = symeig_direct(&b)?;
            let tol = 1e3 * n as f64 * U * spectral_norm(&b);
            let eig = sdc
                .lambda
                .iter()
                .zip(&direct.lambda)
                .map(|(x, y)| (x - y).abs() / tol)
                .fold(0.0, f64::max);
            let split = sdc
                .splits
                .iter()
                .map(|s| s.decoupling.max(s.projector_error) / (50.0 * s.n as f64 * U))
                .fold(0.0, f64::max);
            Ok((eig, split))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let eig = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let split = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((
        eig <= 1.0 && split <= 1.0,
        format!("eigenvalue gap/(1e3 n u ||B||) max {eig:.3}; split invariants/(50 n u) max {split:.3}; 50 instances, n <= 100"),
    ))
}

/// Sandwich and nearby-isometry bound on seeded instances.
pub fn criterion_lemmas() -> Result<(bool, String)> {
    let mut sandwich_fail = 0;
    let mut bound_fail = 0;
    for i in 0..100u64 {
        let mut g = Gaussian::new(7000 + i);
        let n = 2 + (i as usize % 9);
        let m = n + (i as usize % 4);
        let r = 1 + (i as usize * 5) % n;
        let mut sigma: Vec<f64> = (0..r).map(|_| 0.8 + 0.4 * g.uniform()).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        sigma.resize(n, 0.0);
        let a = with_singular_values(m, &sigma, 7000 + i)?;
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            if !lemma22_check(&a, kind)?.holds(sandwich_slack(m, n)) {
                sandwich_fail += 1;
            }
        }
        let ones: Vec<f64> = sigma.iter().map(|&s| if s > 0.0 { 1.0 } else { 0.0 }).collect();
        let near = add_noise(&with_singular_values(m, &ones, 9000 + i)?, 1e-8, i);
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            let b = lemma23_bound(&near, 1e-6, kind)?;
            if b.achieved > b.bound || b.rank != r {
                bound_fail += 1;
            }
        }
    }
    Ok((
        sandwich_fail == 0 && bound_fail == 0,
        format!("sandwich violations {sandwich_fail}/200; bound violations {bound_fail}/200"),
    ))
}

/// Complete 2x2 CSD of Haar unitaries.
pub fn criterion_two_by_two(cfg: &SelftestConfig) -> Result<(bool, String)> {
    let mut jobs = Vec::new();
    for &n in &[10usize, 30] {
        for &seed in &cfg.seeds {
            for &method in &cfg.methods {
                jobs.push((n, seed, method));
            }
        }
    }
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(n, seed, method)| {
            let a = gen_haar_stiefel(2 * n, 2 * n, 400 + seed)?;
            let r = csd_2x2(&a, &CsdOptions::with_method(method))?;
            let tol = 50.0 * n as f64 * U;
            let res = spectral_norm(&(&r.reconstruct() - &a)) / tol;
            Ok(res.max(r.v2.orthogonality_error() / tol))
        })
        .collect();
    let worst = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok((
        worst <= 1.0,
        format!("max(residual, ||V2^*V2 - I||)/(50 n u) = {worst:.3}; n in {{10, 30}}, {} runs", jobs.len()),
    ))
}

pub const TITLES: [&str; 9] = [
    "small-angle eigenvector experiment",
    "full-rank backward stability (classes 1, 2, 1', 2')",
    "rank-deficient branch (classes 3, 4, 3', 4')",
    "instability witness for B = H1",
    "polar decomposition contracts",
    "eigensolver oracle equivalence",
    "partial-isometry lemmas",
    "2x2 completion",
    "table cells replaced by property checks",
];

/// Runs every criterion; results ordered by id.
pub fn run_all(cfg: &SelftestConfig) -> Vec<CriterionResult> {
    let mut results: Vec<CriterionResult> = (1..=8u8)
        .into_par_iter()
        .map(|id| {
            let r = match id {
                1 => criterion_small_angles(),
                2 => criterion_full_rank(cfg),
                3 => criterion_rank_deficient(cfg),
                4 => criterion_instability_witness(),
                5 => criterion_polar(),
                6 => criterion_symeig(),
                7 => criterion_lemmas(),
                _ => criterion_two_by_two(cfg),
            };
            CriterionResult::from_result(id, TITLES[id as usize - 1], r)
        })
        .collect();
    let substitutes = results[1].passed && results[2].passed;
    results.push(CriterionResult::new(
        9,
        TITLES[8],
        substitutes,
        "numeric table cells are machine and seed dependent; covered by criteria 2 and 3".into(),
    ));
    results
}
