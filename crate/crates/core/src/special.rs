//! Gamma and cosecant for the interference and association kernels.

use crate::scalar::Scalar;

// Lanczos approximation, g = 7, n = 9 (Godfrey coefficients).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// The gamma function for real arguments, via the Lanczos series with the
/// reflection formula below one half. Poles (non-positive integers) return NaN.
pub fn gamma<F: Scalar>(x: F) -> F {
    if x <= F::zero() && x == x.floor() {
        return F::nan();
    }
    if x < F::lit(0.5) {
        let pi = F::PI();
        return pi / ((pi * x).sin() * gamma(F::one() - x));
    }
    let x = x - F::one();
    let mut acc = F::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + F::lit(c) / (x + F::from_usize_lossy(i));
    }
    let t = x + F::lit(LANCZOS_G + 0.5);
    (F::TAU()).sqrt() * t.powf(x + F::lit(0.5)) * (-t).exp() * acc
}

/// Cosecant, `1 / sin(x)`.
#[inline]
pub fn csc<F: Scalar>(x: F) -> F {
    x.sin().recip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(0.5_f64), std::f64::consts::PI.sqrt()) < 1e-14);
        assert!(rel(gamma(1.0_f64), 1.0) < 1e-14);
        assert!(rel(gamma(5.0_f64), 24.0) < 1e-13);
        // Γ(1/3), Γ(2/3) to 16 digits
        assert!(rel(gamma(1.0_f64 / 3.0), 2.678_938_534_707_747_6) < 1e-13);
        assert!(rel(gamma(2.0_f64 / 3.0), 1.354_117_939_426_400_4) < 1e-13);
        assert!(rel(gamma(0.1_f64), 9.513_507_698_668_732) < 1e-13);
        assert!(gamma(0.0_f64).is_nan());
        assert!(gamma(-2.0_f64).is_nan());
        assert!(rel(gamma(0.5_f32) as f64, std::f64::consts::PI.sqrt()) < 1e-6);
    }

    #[test]
    fn gamma_recurrence_and_reflection() {
        for i in 1..200 {
            let x = 0.013 * i as f64 + 0.2;
            assert!(rel(gamma(x + 1.0), x * gamma(x)) < 1e-13, "x = {x}");
            let lhs = gamma(x) * gamma(1.0 - x);
            if (x - x.round()).abs() > 1e-3 {
                let rhs = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
                assert!(rel(lhs, rhs) < 1e-12, "x = {x}");
            }
        }
    }

    #[test]
    fn csc_matches_definition() {
        assert!((csc(std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert!((csc(std::f64::consts::PI / 6.0) - 2.0).abs() < 1e-14);
    }
}
