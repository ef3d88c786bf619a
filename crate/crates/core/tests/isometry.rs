use csdk::csd::{csd, CsdOptions};
use csdk::isometry::{
    dist_to_partial_isometry, eps_rank, lemma22_check, lemma23_bound, norm, sandwich_slack, stability_report, NormKind,
};
use csdk::kernel::svd_factor;
use csdk::testgen::{add_noise, gen_haar_stiefel, Gaussian, TestCase, TestClass};
use csdk::{Matrix, C64, UNIT_ROUNDOFF as U};
use proptest::prelude::*;

/// `P_k Q_k^*`, the canonical polar factor of the rank-k truncation.
fn truncation_factor(a: &Matrix, k: usize) -> Matrix {
    let f = svd_factor(a).unwrap();
    let idx: Vec<usize> = (0..k).collect();
    f.p.select_cols(&idx).mul_adjoint(&f.q.select_cols(&idx))
}

/// Truncated SVD `A_k`.
fn truncation(a: &Matrix, k: usize) -> Matrix {
    let f = svd_factor(a).unwrap();
    let idx: Vec<usize> = (0..k).collect();
    let mut p = f.p.select_cols(&idx);
    for j in 0..k {
        p.scale_col(j, C64::new(f.sigma[j], 0.0));
    }
    p.mul_adjoint(&f.q.select_cols(&idx))
}

fn with_singular_values(m: usize, sigma: &[f64], seed: u64) -> Matrix {
    let n = sigma.len();
    let mut p = gen_haar_stiefel(m, n, seed).unwrap();
    let q = gen_haar_stiefel(n, n, seed + 500).unwrap();
    for (j, &s) in sigma.iter().enumerate() {
        p.scale_col(j, C64::new(s, 0.0));
    }
    p.mul_adjoint(&q)
}

#[test]
fn distance_matches_truncation_enumeration() {
    for seed in 0..10 {
        let mut g = Gaussian::new(seed);
        let a = g.matrix(6, 4).scale_real(0.5);
        let brute = (0..=4)
            .map(|k| norm(&(&a - &truncation_factor(&a, k)), NormKind::Spectral))
            .fold(f64::INFINITY, f64::min);
        let d = dist_to_partial_isometry(&a).unwrap();
        assert!((d - brute).abs() <= 1e2 * U, "{d} vs {brute}");
    }
}

#[test]
fn eps_rank_matches_truncation_enumeration() {
    for seed in 0..10 {
        let a = Gaussian::new(seed).matrix(5, 4).scale_real(0.1);
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            let brute = (0..=4)
                .find(|&k| norm(&(&a - &truncation(&a, k)), kind) <= 0.1)
                .unwrap();
            assert_eq!(eps_rank(&a, 0.1, kind).unwrap(), brute, "seed {seed} {kind}");
        }
    }
}

#[test]
fn generated_classes_are_partial_isometries() {
    for class in TestClass::ALL {
        for n in [6, 17] {
            let a = TestCase::new(class, false, n, 3).unwrap().generate().unwrap();
            assert!(dist_to_partial_isometry(&a).unwrap() <= 1e2 * n as f64 * U, "{class:?} {n}");
        }
    }
}

#[test]
fn report_on_exact_factors() {
    let n = 8;
    let a = gen_haar_stiefel(2 * n, n, 9).unwrap();
    let r = csd(&a, n, &CsdOptions::default()).unwrap();
    // feed the exact factors of the reconstruction back in
    let a_hat = r.reconstruct();
    let rep = stability_report(&a_hat, &r).unwrap();
    assert!(rep.residual_2norm <= 10.0 * n as f64 * U);
    assert!(rep.is_finite());
}

#[test]
fn report_on_class1_and_noisy() {
    let n = 30;
    let a = gen_haar_stiefel(2 * n, n, 1).unwrap();
    let rep = stability_report(&a, &csd(&a, n, &CsdOptions::default()).unwrap()).unwrap();
    let nf = n as f64;
    assert!(rep.orth_u1 <= 50.0 * nf && rep.orth_u2 <= 50.0 * nf && rep.orth_v1 <= 50.0 * nf);
    let noisy = add_noise(&a, 1e-10, 1);
    let rep = stability_report(&noisy, &csd(&noisy, n, &CsdOptions::default()).unwrap()).unwrap();
    assert!(rep.scaled_residual <= 10.0, "{rep:?}");
    assert!(rep.d_of_a > 1e-11);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sandwich_holds(seed in 0u64..100_000, n in 1usize..8, extra in 0usize..4) {
        let mut g = Gaussian::new(seed);
        let sigma: Vec<f64> = (0..n).map(|_| 0.8 + 0.4 * g.uniform()).collect();
        let a = with_singular_values(n + extra, &sigma, seed);
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            let s = lemma22_check(&a, kind).unwrap();
            prop_assert!(s.holds(sandwich_slack(n + extra, n)), "{:?}", s);
        }
    }

    #[test]
    fn nearby_bound_holds(seed in 0u64..100_000, n in 2usize..8, r in 1usize..8) {
        let r = r.min(n);
        let a = with_singular_values(n + 2, &[vec![1.0; r], vec![0.0; n - r]].concat(), seed);
        let a = add_noise(&a, 1e-8, seed);
        for kind in [NormKind::Spectral, NormKind::Frobenius] {
            let b = lemma23_bound(&a, 1e-6, kind).unwrap();
            prop_assert_eq!(b.rank, r);
            prop_assert!(b.achieved <= b.bound, "{:?}", b);
        }
    }
}
