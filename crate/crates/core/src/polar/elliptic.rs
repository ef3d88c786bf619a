//! Jacobi elliptic functions and the complete elliptic integral, restricted
//! to what the Zolotarev coefficients need: real arguments and a modulus
//! given together with its complement (so `k` close to 1 stays accurate).

use std::f64::consts::FRAC_PI_2;

const MAX_AGM_STEPS: usize = 64;

/// Arithmetic-geometric mean of two positive numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..MAX_AGM_STEPS {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind `K(k)` given the
/// complementary modulus `kp = sqrt(1 - k^2)`.
pub fn ellipk_from_complement(kp: f64) -> f64 {
    FRAC_PI_2 / agm(1.0, kp)
}

/// `(sn, cn, dn)(u | k)` by the descending Landen (AGM) scheme. The modulus
/// is passed with its complement `kp`.
pub fn ellipj(u: f64, k: f64, kp: f64) -> (f64, f64, f64) {
    if u == 0.0 {
        return (0.0, 1.0, 1.0);
    }
    let mut a = vec![1.0];
    let mut c = vec![k];
    let mut b = kp;
    while c.last().unwrap().abs() > f64::EPSILON && a.len() < MAX_AGM_STEPS {
        let an = *a.last().unwrap();
        let next_a = 0.5 * (an + b);
        let next_c = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(next_a);
        c.push(next_c);
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    let mut prev = phi;
    for j in (1..=n).rev() {
        prev = phi;
        phi = 0.5 * (phi + (c[j] * phi.sin() / a[j]).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let _ = prev;
    let dn = (kp * kp + k * k * cn * cn).sqrt();
    (sn, cn, dn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_modulus_reduces_to_circular() {
        let (sn, cn, dn) = ellipj(0.7, 0.0, 1.0);
        assert!((sn - 0.7f64.sin()).abs() < 1e-15);
        assert!((cn - 0.7f64.cos()).abs() < 1e-15);
        assert!((dn - 1.0).abs() < 1e-15);
        assert!((ellipk_from_complement(1.0) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn unit_modulus_reduces_to_hyperbolic() {
        let kp: f64 = 1e-10;
        let (sn, cn, _) = ellipj(0.9, (1.0 - kp * kp).sqrt(), kp);
        assert!((sn - 0.9f64.tanh()).abs() < 1e-14);
        assert!((cn - 1.0 / 0.9f64.cosh()).abs() < 1e-14);
    }

    #[test]
    fn identities_and_quarter_period() {
        let k: f64 = 0.8;
        let kp = (1.0 - k * k).sqrt();
        let kk = ellipk_from_complement(kp);
        // K(0.8) = 1.995302777664729...
        assert!((kk - 1.995_302_777_664_729).abs() < 1e-13);
        let (sn, cn, dn) = ellipj(kk, k, kp);
        assert!((sn - 1.0).abs() < 1e-14 && cn.abs() < 1e-7);
        assert!((dn - kp).abs() < 1e-12);
        for &u in &[0.1, 0.5, 1.3] {
            let (sn, cn, dn) = ellipj(u, k, kp);
            assert!((sn * sn + cn * cn - 1.0).abs() < 1e-15);
            assert!((dn * dn + k * k * sn * sn - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        // d sn / du = cn dn
        let k: f64 = 0.6;
        let kp = (1.0 - k * k).sqrt();
        let h = 1e-5;
        let u = 0.8;
        let (sp, _, _) = ellipj(u + h, k, kp);
        let (sm, _, _) = ellipj(u - h, k, kp);
        let (_, cn, dn) = ellipj(u, k, kp);
        assert!(((sp - sm) / (2.0 * h) - cn * dn).abs() < 1e-9);
    }
}
