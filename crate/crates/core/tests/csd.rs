use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use csdk::csd::{
    build_b, csd, csd_2x2, csd_rank_deficient, extract_cs, polar_via_qr_fix, Branch, CsExtraction,
    CsdOptions, CsdResult, RankMode,
};
use csdk::isometry::stability_report;
use csdk::kernel::spectral_norm;
use csdk::polar::{polar_svd, PolarMethod, DEFAULT_EPSILON};
use csdk::symeig::symeig_direct;
use csdk::testgen::{
    assemble_csd, deficient_rank, gen_clustered_with_angles, gen_haar_stiefel,
    gen_rank_deficient_clustered, gen_rank_deficient_haar, Gaussian,
};
use csdk::{Error, Matrix, C64, UNIT_ROUNDOFF as U};
use proptest::prelude::*;

const METHODS: [PolarMethod; 3] = [PolarMethod::Svd, PolarMethod::Qdwh, PolarMethod::Zolo];

fn listed_v() -> Matrix {
    Matrix::from_real_rows(&[&[2.0, -1.0, 2.0], &[2.0, 2.0, -1.0], &[1.0, -2.0, -2.0]]).scale_real(1.0 / 3.0)
}

fn cs(theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (theta.iter().map(|t| t.cos()).collect(), theta.iter().map(|t| t.sin()).collect())
}

/// Haar factors around prescribed angles.
fn from_angles(theta: &[f64], seed: u64) -> Matrix {
    let n = theta.len();
    let (c, s) = cs(theta);
    let u1 = gen_haar_stiefel(n, n, seed).unwrap();
    let u2 = gen_haar_stiefel(n, n, seed + 1).unwrap();
    let v1 = gen_haar_stiefel(n, n, seed + 2).unwrap();
    assemble_csd(&u1, &u2, &c, &s, &v1)
}

fn check_contract(a: &Matrix, r: &CsdResult, label: &str) {
    let n = a.ncols() as f64;
    let rep = stability_report(a, r).unwrap();
    assert!(rep.residual_2norm <= (50.0 * n * U).max(10.0 * rep.d_of_a), "{label}: {rep:?}");
    assert!(rep.orth_u1 <= 50.0 * n && rep.orth_u2 <= 50.0 * n && rep.orth_v1 <= 50.0 * n, "{label}: {rep:?}");
    assert!(rep.cs_identity_err <= 1e2 * U, "{label}: {rep:?}");
    assert!(r.theta.windows(2).all(|w| w[0] <= w[1]), "{label}");
    for i in 0..r.k() {
        assert!((0.0..=1.0).contains(&r.c[i]) && (0.0..=1.0).contains(&r.s[i]));
        assert_eq!(r.c[i], r.theta[i].cos());
        assert_eq!(r.s[i], r.theta[i].sin());
    }
}

#[test]
fn identity_block() {
    let n = 4;
    let a = Matrix::vstack(&Matrix::identity(n), &Matrix::zeros(n, n));
    for method in METHODS {
        let r = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
        assert_eq!(r.branch, Branch::IllConditioned.min_if(method));
        assert!(r.theta.iter().all(|&t| t == 0.0), "{method}: {:?}", r.theta);
        assert!(r.c.iter().all(|&c| c == 1.0));
        check_contract(&a, &r, method.as_str());
        // U1 = V1 up to phase
        assert!((&r.u1 - &r.v1).max_abs() <= 1e2 * U, "{method}");
    }
}

trait BranchFor {
    fn min_if(self, method: PolarMethod) -> Branch;
}

impl BranchFor for Branch {
    // the SVD method never takes the ill-conditioned route
    fn min_if(self, method: PolarMethod) -> Branch {
        if method == PolarMethod::Svd {
            Branch::FullRank
        } else {
            self
        }
    }
}

#[test]
fn equal_blocks_give_quarter_pi() {
    let n = 5;
    let a = Matrix::vstack(&Matrix::identity(n), &Matrix::identity(n)).scale_real(FRAC_1_SQRT_2);
    for method in METHODS {
        let r = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
        assert_eq!(r.branch, Branch::FullRank);
        for i in 0..n {
            assert!((r.theta[i] - FRAC_PI_4).abs() <= 10.0 * U);
            assert!((r.c[i] - FRAC_1_SQRT_2).abs() <= 10.0 * U);
        }
        check_contract(&a, &r, method.as_str());
    }
}

#[test]
fn small_angle_example() {
    let theta = [1e-8, 2e-8, 3e-8];
    let (c, s) = cs(&theta);
    let v = listed_v();
    let a = assemble_csd(&v, &v, &c, &s, &v);
    for method in METHODS {
        let r = csd(&a, 3, &CsdOptions::with_method(method)).unwrap();
        for i in 0..3 {
            assert!((r.theta[i] - theta[i]).abs() <= 1e-15, "{method}: {:?}", r.theta);
        }
        assert!(spectral_norm(&(&r.reconstruct() - &a)) <= 1e-14);
        check_contract(&a, &r, method.as_str());
    }
}

#[test]
fn b_route_beats_h1_route_on_small_angles() {
    let theta = [1e-8, 2e-8, 3e-8];
    let (c, s) = cs(&theta);
    let v = listed_v();
    let h1 = assemble_csd(&v, &v, &c, &c, &v).rows_range(0, 3);
    let h2 = assemble_csd(&v, &v, &s, &s, &v).rows_range(0, 3);
    let good = symeig_direct(&(&h2 - &h1).hermitian_part()).unwrap().v;
    let bad = symeig_direct(&h1.hermitian_part()).unwrap().v;
    let off = |w: &Matrix| w.adjoint_mul(&h2).matmul(w).max_off_diag();
    assert!(off(&good) <= 1e-15, "{}", off(&good));
    assert!(off(&bad) >= 1e-10, "{}", off(&bad));
}

#[test]
fn class3_is_economical() {
    let n = 16;
    let a = gen_rank_deficient_haar(n, 3).unwrap();
    let r = csd(&a, n, &CsdOptions::default()).unwrap();
    assert_eq!(r.branch, Branch::RankDeficient);
    assert_eq!((r.rank, r.k()), (12, 12));
    assert_eq!(r.mu, 2.0);
    let err = r.c.iter().zip(&r.s).map(|(c, s)| (c * c + s * s - 1.0).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-14);
    check_contract(&a, &r, "class 3");
}

#[test]
fn b_spectrum_on_exact_partial_isometry() {
    let n = 12;
    let r = deficient_rank(n);
    let a = gen_rank_deficient_haar(n, 8).unwrap();
    let h1 = polar_svd(&a.rows_range(0, n)).unwrap().h;
    let h2 = polar_svd(&a.rows_range(n, n)).unwrap().h;
    let b = build_b(&h1, &h2, &a, 2.0);
    assert_eq!(b, b.adjoint());
    let lambda = symeig_direct(&b).unwrap().lambda;
    assert!(lambda[..r].iter().all(|&l| l.abs() <= 1.0 + 1e2 * U), "{lambda:?}");
    assert!(lambda[r..].iter().all(|&l| (l - 2.0).abs() <= 1e2 * U), "{lambda:?}");
}

#[test]
fn extraction_matches_construction() {
    let n = 10;
    let mut g = Gaussian::new(4);
    let theta: Vec<f64> = (0..n).map(|_| FRAC_PI_2 * g.uniform()).collect();
    let (c, s) = cs(&theta);
    let v = gen_haar_stiefel(n, n, 5).unwrap();
    let conj = |d: &[f64]| {
        let mut vd = v.clone();
        for (j, &x) in d.iter().enumerate() {
            vd.scale_col(j, C64::new(x, 0.0));
        }
        vd.mul_adjoint(&v).hermitian_part()
    };
    let (ec, es) = extract_cs(&v, &conj(&c), &conj(&s));
    for i in 0..n {
        assert!((ec[i] - c[i]).abs() <= 1e2 * U && (es[i] - s[i]).abs() <= 1e2 * U);
    }
}

#[test]
fn qr_fix_on_near_singular_block() {
    let a = Matrix::from_real_diag(&[1.0, 1e-16]);
    let fix = polar_via_qr_fix(&a, DEFAULT_EPSILON, PolarMethod::Qdwh).unwrap();
    assert!(!fix.fell_back);
    assert!(fix.r_agreement <= 1e2 * U, "{}", fix.r_agreement);
    let oracle = polar_svd(&a).unwrap();
    for j in 0..2 {
        // equal up to column phase
        let d = fix.factors.w[(j, j)].norm();
        assert!((d - 1.0).abs() <= 1e2 * U);
        assert!((fix.factors.w[(j, j)] - oracle.w[(j, j)]).norm() <= 1e2 * U);
    }
    let err = polar_via_qr_fix(&Matrix::identity(2), DEFAULT_EPSILON, PolarMethod::Qdwh);
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn qr_fix_on_clustered_block() {
    let n = 30;
    // clustered angles from the generator are tiny at the front, so A2 is
    // numerically singular for most seeds
    let mut hit = 0;
    for seed in 0..6 {
        let (a, _) = gen_clustered_with_angles(n, seed).unwrap();
        let a2 = a.rows_range(n, n);
        for method in [PolarMethod::Qdwh, PolarMethod::Zolo] {
            match polar_via_qr_fix(&a2, DEFAULT_EPSILON, method) {
                Ok(fix) => {
                    hit += 1;
                    let f = &fix.factors;
                    assert!(f.residual(&a2) <= 50.0 * n as f64 * U, "{method} seed {seed}");
                    assert!(f.w.orthogonality_error_fro() <= 50.0 * n as f64 * U);
                }
                Err(Error::Precondition(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(hit > 0);
}

#[test]
fn padded_rank_one() {
    let a = Matrix::vstack(&Matrix::from_real_diag(&[1.0, 0.0]), &Matrix::zeros(2, 2));
    for method in METHODS {
        let r = csd(&a, 2, &CsdOptions::with_method(method)).unwrap();
        assert_eq!(r.k(), 1);
        assert_eq!((r.c[0], r.s[0]), (1.0, 0.0));
        check_contract(&a, &r, method.as_str());
    }
}

#[test]
fn rank_deficient_classes_n20() {
    let n = 20;
    for seed in 0..2 {
        for (label, a) in [
            ("class 3", gen_rank_deficient_haar(n, seed).unwrap()),
            ("class 4", gen_rank_deficient_clustered(n, seed).unwrap()),
        ] {
            for method in METHODS {
                let r = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
                assert_eq!(r.k(), deficient_rank(n));
                check_contract(&a, &r, &format!("{label} {method} seed {seed}"));
            }
        }
    }
}

#[test]
fn null_space_gap_near_quarter_pi() {
    let n = 20;
    let r = deficient_rank(n);
    let mut theta: Vec<f64> = (0..n).map(|i| FRAC_PI_4 + 1e-3 * i as f64).collect();
    let (mut c, mut s) = cs(&theta);
    for i in r..n {
        c[i] = 0.0;
        s[i] = 0.0;
    }
    theta.truncate(r);
    let u1 = gen_haar_stiefel(n, n, 1).unwrap();
    let u2 = gen_haar_stiefel(n, n, 2).unwrap();
    let v1 = gen_haar_stiefel(n, n, 3).unwrap();
    let a = assemble_csd(&u1, &u2, &c, &s, &v1);
    let h1 = polar_svd(&a.rows_range(0, n)).unwrap().h;
    let h2 = polar_svd(&a.rows_range(n, n)).unwrap().h;
    let lambda = symeig_direct(&build_b(&h1, &h2, &a, 2.0)).unwrap().lambda;
    assert!(lambda[r] - lambda[r - 1] >= 0.9);
    for method in METHODS {
        let res = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
        check_contract(&a, &res, method.as_str());
        for (x, y) in res.theta.iter().zip(&theta) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn clustered_angles_recovered() {
    let n = 30;
    for seed in 0..3 {
        let (a, theta) = gen_clustered_with_angles(n, seed).unwrap();
        for method in METHODS {
            let r = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
            check_contract(&a, &r, &format!("{method} seed {seed}"));
            let dev = r.theta.iter().zip(&theta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dev <= 1e-7, "{method} seed {seed}: {dev}");
        }
    }
}

#[test]
fn lambda_extraction_is_backward_stable() {
    let n = 15;
    let a = gen_haar_stiefel(2 * n, n, 6).unwrap();
    let opts = CsdOptions {
        cs_extraction: CsExtraction::FromLambda,
        ..CsdOptions::default()
    };
    let r = csd(&a, n, &opts).unwrap();
    let rep = stability_report(&a, &r).unwrap();
    assert!(rep.residual_2norm <= 1e3 * n as f64 * U, "{rep:?}");
}

#[test]
fn rejects_bad_inputs() {
    let a = Matrix::vstack(&Matrix::identity(3), &Matrix::zeros(3, 3)).scale_real(0.5);
    assert!(matches!(
        csd(&a, 3, &CsdOptions::default()),
        Err(Error::NotNearPartialIsometry { .. })
    ));
    let a = gen_haar_stiefel(8, 4, 1).unwrap();
    assert!(matches!(csd(&a, 3, &CsdOptions::default()), Err(Error::DimensionMismatch(_))));
    assert!(matches!(csd(&a, 5, &CsdOptions::default()), Err(Error::DimensionMismatch(_))));
    let opts = CsdOptions {
        epsilon: 0.1,
        ..CsdOptions::default()
    };
    assert!(matches!(csd(&a, 4, &opts), Err(Error::InvalidArgument(_))));
}

#[test]
fn full_mode_on_rank_deficient_input_is_reported() {
    let n = 8;
    let a = gen_rank_deficient_haar(n, 2).unwrap();
    let opts = CsdOptions {
        rank_mode: RankMode::Full,
        ..CsdOptions::default()
    };
    assert!(matches!(csd(&a, n, &opts), Err(Error::RankMismatch(_))));
}

#[test]
fn deficient_mode_on_full_rank_input() {
    let n = 6;
    let a = gen_haar_stiefel(2 * n, n, 3).unwrap();
    let r = csd_rank_deficient(&a, n, n, &CsdOptions::default()).unwrap();
    assert_eq!(r.k(), n);
    check_contract(&a, &r, "deficient on full");
}

#[test]
fn two_by_two_identity() {
    let n = 4;
    let a = Matrix::identity(2 * n);
    let r = csd_2x2(&a, &CsdOptions::default()).unwrap();
    assert!(r.left.c.iter().all(|&c| c == 1.0));
    assert!(r.v2.orthogonality_error() <= 10.0 * U);
    assert!(spectral_norm(&(&r.reconstruct() - &a)) <= 10.0 * U);
}

#[test]
fn two_by_two_rotation() {
    let theta = [0.3, 0.7];
    let (c, s) = cs(&theta);
    let (cm, sm) = (Matrix::from_real_diag(&c), Matrix::from_real_diag(&s));
    let mut a = Matrix::zeros(4, 4);
    a.set_block(0, 0, &cm);
    a.set_block(0, 2, &sm.scale_real(-1.0));
    a.set_block(2, 0, &sm);
    a.set_block(2, 2, &cm);
    let r = csd_2x2(&a, &CsdOptions::default()).unwrap();
    for i in 0..2 {
        assert!((r.left.theta[i] - theta[i]).abs() <= 1e-14);
    }
    assert!(spectral_norm(&(&r.reconstruct() - &a)) <= 50.0 * 2.0 * U);
}

#[test]
fn two_by_two_haar() {
    let n = 20;
    let a = gen_haar_stiefel(2 * n, 2 * n, 12).unwrap();
    for method in METHODS {
        let r = csd_2x2(&a, &CsdOptions::with_method(method)).unwrap();
        assert!((&r.reconstruct() - &a).frobenius_norm() <= 50.0 * n as f64 * U, "{method}");
        assert!(r.v2.orthogonality_error() <= 50.0 * n as f64 * U, "{method}");
    }
    let not_unitary = a.scale_real(1.01);
    assert!(matches!(csd_2x2(&not_unitary, &CsdOptions::default()), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn swap_reflects_angles(seed in 0u64..10_000, n in 2usize..12) {
        let a = gen_haar_stiefel(2 * n, n, seed).unwrap();
        let swapped = Matrix::vstack(&a.rows_range(n, n), &a.rows_range(0, n));
        let r = csd(&a, n, &CsdOptions::default()).unwrap();
        let q = csd(&swapped, n, &CsdOptions::default()).unwrap();
        for i in 0..n {
            let t = FRAC_PI_2 - r.theta[n - 1 - i];
            prop_assert!((q.theta[i] - t).abs() <= 10.0 * n as f64 * U);
        }
    }

    #[test]
    fn gap_domination(seed in 0u64..10_000, n in 2usize..10) {
        let a = gen_haar_stiefel(2 * n, n, seed).unwrap();
        let r = csd(&a, n, &CsdOptions::default()).unwrap();
        let g = |t: f64| t.sin() - t.cos();
        for i in 0..n {
            for j in 0..n {
                let (ti, tj) = (r.theta[i], r.theta[j]);
                let gap = (g(ti) - g(tj)).abs() + 4.0 * U;
                prop_assert!((ti.cos() - tj.cos()).abs() <= gap);
                prop_assert!((ti.sin() - tj.sin()).abs() <= gap);
            }
        }
    }

    #[test]
    fn contract_over_random_angles(seed in 0u64..10_000, n in 2usize..14, log_min in -17.0f64..0.0) {
        let mut g = Gaussian::new(seed);
        let theta: Vec<f64> = (0..n).map(|_| FRAC_PI_2 * 10f64.powf(log_min * g.uniform())).collect();
        let a = from_angles(&theta, seed);
        for method in METHODS {
            let r = csd(&a, n, &CsdOptions::with_method(method)).unwrap();
            let rep = stability_report(&a, &r).unwrap();
            let nf = n as f64;
            prop_assert!(rep.residual_2norm <= 50.0 * nf * U, "{} {:?}", method, rep);
            prop_assert!(rep.orth_u1 <= 50.0 * nf && rep.orth_u2 <= 50.0 * nf && rep.orth_v1 <= 50.0 * nf, "{} {:?}", method, rep);
        }
    }
}
