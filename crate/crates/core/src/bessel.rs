//! Zeroth-order Bessel function of the first kind.
//!
//! Below `SERIES_CUTOFF` the ascending power series is summed directly; the
//! largest term there is about 1e5, which keeps the cancellation error near
//! 1e-11. Above it the Hankel asymptotic expansion is truncated at its
//! smallest term, which is below 1e-13 for every argument past the cutoff.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 15.0;

/// J0(x) for finite `x`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(j0(x))
}

/// J0 without the finiteness check; callers guarantee a finite argument.
pub(crate) fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_CUTOFF {
        power_series(x)
    } else {
        hankel_asymptotic(x)
    }
}

fn power_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if (term.abs() < 1e-18 && k > x) || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn hankel_asymptotic(x: f64) -> f64 {
    // a_k = prod_{j=1..k} (-(2j-1)^2) / (k! 8^k); the k-th term is a_k / x^k.
    // P collects the even orders and Q the odd ones, each with sign (-1)^(k/2).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut previous = f64::INFINITY;
    for k in 0..64u32 {
        let odd = f64::from(2 * k + 1);
        let next = term * (-(odd * odd)) / (f64::from(k + 1) * 8.0 * x);
        if next.abs() >= previous || next.abs() < 1e-17 {
            break;
        }
        let order = k + 1;
        let sign = if (order / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if order % 2 == 0 {
            p += sign * next;
        } else {
            q += sign * next;
        }
        previous = next.abs();
        term = next;
    }
    let phase = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt. The integrand is smooth
    /// and periodic, so the trapezoid rule converges geometrically once the
    /// node count exceeds the argument.
    fn integral_oracle(x: f64) -> f64 {
        let n = (2.0 * x.abs()) as usize + 200;
        let h = PI / n as f64;
        let mut sum = 1.0;
        for i in 1..n {
            sum += (x * (i as f64 * h).sin()).cos();
        }
        sum * h / PI
    }

    const ZEROS: [f64; 5] = [
        2.404_825_557_695_773,
        5.520_078_110_286_311,
        8.653_727_912_911_012,
        11.791_534_439_014_281,
        14.930_917_708_487_786,
    ];

    #[test]
    fn value_at_origin() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn first_zero() {
        assert!(bessel_j0(ZEROS[0]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn even_function() {
        for i in 0..200 {
            let x = 0.37 * i as f64;
            assert_eq!(j0(x), j0(-x));
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(bessel_j0(f64::NAN).is_err());
        assert!(bessel_j0(f64::INFINITY).is_err());
    }

    #[test]
    fn sign_changes_bracket_published_zeros() {
        for z in ZEROS {
            let lo = j0(z - 1e-6);
            let hi = j0(z + 1e-6);
            assert!(lo * hi < 0.0, "no sign change around {z}");
        }
    }

    #[test]
    fn matches_integral_oracle() {
        let mut worst: f64 = 0.0;
        let mut x = 0.0;
        while x <= 60.0 {
            worst = worst.max((j0(x) - integral_oracle(x)).abs());
            x += 0.013;
        }
        for &x in &[99.5, 250.0, 1234.567, 5000.0, 9999.9, 10_000.0] {
            worst = worst.max((j0(x) - integral_oracle(x)).abs());
        }
        assert!(worst < 1e-8, "max abs error {worst:e}");
    }

    #[test]
    fn bounded_by_one() {
        let mut x = 0.0;
        while x < 1e4 {
            assert!(j0(x).abs() <= 1.0);
            x += 0.731;
        }
    }
}
