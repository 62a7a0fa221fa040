//! Special functions used by the overlap integrals and the drive spectrum:
//! integer-order Bessel functions of the first kind, associated Laguerre
//! polynomials, terminating Gauss hypergeometric sums and log-factorials.
//!
//! Everything here is a pure function of its arguments.

use crate::error::{Error, Result};

pub const MAX_BESSEL_ORDER: i32 = 64;
pub const MAX_BESSEL_ARG: f64 = 50.0;
pub const MAX_LAGUERRE_DEGREE: i32 = 64;

/// Below this argument the ascending series is used, above it Miller's
/// downward recurrence.
const SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind `J_order(x)` for integer order.
///
/// Absolute error is below 1e-12 for `|order| <= 64`, `|x| <= 50`.
pub fn bessel_j(order: i32, x: f64) -> Result<f64> {
    if order.abs() > MAX_BESSEL_ORDER {
        return Err(Error::domain(
            "bessel_j",
            format!("|order| = {} exceeds {MAX_BESSEL_ORDER}", order.abs()),
        ));
    }
    if !x.is_finite() || x.abs() > MAX_BESSEL_ARG {
        return Err(Error::domain(
            "bessel_j",
            format!("|x| = {} exceeds {MAX_BESSEL_ARG}", x.abs()),
        ));
    }
    let n = order.unsigned_abs();
    // J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x)
    let mut sign = 1.0;
    if order < 0 && n % 2 == 1 {
        sign = -sign;
    }
    if x < 0.0 && n % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    let value = if ax <= SERIES_LIMIT {
        bessel_series(n, ax)
    } else {
        bessel_miller(n, ax)
    };
    Ok(sign * value)
}

fn bessel_series(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    // leading term (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 1u32;
    loop {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) || k > 500 {
            break;
        }
        k += 1;
    }
    sum
}

fn bessel_miller(n: u32, x: f64) -> f64 {
    let big = (n as f64).max(x);
    let mut start = (big + 30.0 + (50.0 * big).sqrt()) as u32;
    start += start % 2;
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    let mut k = start;
    while k > 0 {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
        // cur now holds J_k
        if k == n {
            wanted = cur;
        }
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * cur;
        }
    }
    norm += cur;
    wanted / norm
}

/// Associated Laguerre polynomial `L_n^k(x)` by the three-term recurrence.
pub fn assoc_laguerre(n: i32, k: i32, x: f64) -> Result<f64> {
    if n < 0 || k < 0 {
        return Err(Error::domain(
            "assoc_laguerre",
            format!("negative index (n = {n}, k = {k})"),
        ));
    }
    if n > MAX_LAGUERRE_DEGREE {
        return Err(Error::domain(
            "assoc_laguerre",
            format!("degree {n} exceeds {MAX_LAGUERRE_DEGREE}"),
        ));
    }
    Ok(laguerre_unchecked(n as u32, k as u32, x))
}

pub(crate) fn laguerre_unchecked(n: u32, k: u32, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + k - x) * cur - (m + k) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `2F1(-m, -n; -m-n; z)`, defined as the sum truncated at `k = min(m, n)`.
///
/// The denominator Pochhammer symbol only vanishes for `k > m + n - 1`, which
/// the truncation never reaches. `m = n = 0` returns 1 (the empty sum's
/// leading term).
pub fn hyp2f1_terminating(m: u32, n: u32, z: f64) -> f64 {
    let kmax = m.min(n);
    let (mf, nf) = (m as f64, n as f64);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..kmax {
        let kf = k as f64;
        term *= (kf - mf) * (kf - nf) / ((kf - mf - nf) * (kf + 1.0)) * z;
        sum += term;
    }
    sum
}

const LN_FACT_TABLE: usize = 256;

fn ln_fact_table() -> &'static [f64; LN_FACT_TABLE] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; LN_FACT_TABLE]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACT_TABLE];
        for i in 2..LN_FACT_TABLE {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    })
}

/// `ln(n!)`: exact summation below 256, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        return ln_fact_table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    x * x.ln() - x + 0.5 * (std::f64::consts::TAU * x).ln() + series
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt; the trapezoid rule is
    /// spectrally accurate for this periodic integrand.
    fn bessel_integral_oracle(n: i32, x: f64) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    /// Plain ascending series, summed until terms drop below 1e-16.
    fn bessel_series_oracle(n: u32, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut k = 0u32;
        loop {
            let lf = ln_factorial(k as u64) + ln_factorial((k + n) as u64);
            let mag = ((2 * k + n) as f64 * (x / 2.0).ln() - lf).exp();
            let term = if k.is_multiple_of(2) { mag } else { -mag };
            sum += term;
            if mag < 1e-16 && k > 2 {
                break;
            }
            k += 1;
        }
        sum
    }

    #[test]
    fn bessel_at_zero() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_matches_series_oracle() {
        let expected = bessel_series_oracle(1, 0.9);
        assert!((bessel_j(1, 0.9).unwrap() - expected).abs() < 1e-14);
        // frozen from the series oracle
        assert!((expected - 0.405_949_546_078_805_7).abs() < 1e-14, "{expected}");
    }

    #[test]
    fn bessel_matches_integral_oracle_on_grid() {
        for &x in &[0.3, 1.7, 4.0, 9.5, 11.9, 12.1, 17.3, 25.0, 38.2, 49.9] {
            for n in [0, 1, 2, 5, 10, 20, 40, 64] {
                let got = bessel_j(n, x).unwrap();
                let want = bessel_integral_oracle(n, x);
                assert!((got - want).abs() < 1e-12, "J_{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn first_zero_of_j0() {
        // bisection on the series oracle
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if bessel_series_oracle(0, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - 2.404_825_557_695_773).abs() < 1e-10);
        assert!(bessel_j(0, root).unwrap().abs() < 1e-10);
    }

    #[test]
    fn bessel_reflection_symmetry() {
        for n in 0..12 {
            for &x in &[0.5, 3.3, 14.0, -2.2] {
                let pos = bessel_j(n, x).unwrap();
                let neg = bessel_j(-n, x).unwrap();
                let s = if n % 2 == 0 { 1.0 } else { -1.0 };
                assert!((neg - s * pos).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bessel_domain_errors() {
        assert!(bessel_j(65, 1.0).is_err());
        assert!(bessel_j(2, 50.5).is_err());
        assert!(bessel_j(2, f64::NAN).is_err());
    }

    #[test]
    fn jacobi_anger_normalization() {
        for i in 0..=60 {
            let b = 0.1 * i as f64;
            let s: f64 = (-40..=40).map(|a| bessel_j(a, b).unwrap().powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-10, "B = {b}: {s}");
        }
    }

    #[test]
    fn laguerre_closed_forms() {
        assert_eq!(assoc_laguerre(0, 0, 3.7).unwrap(), 1.0);
        for &x in &[-1.0, 0.0, 0.4, 7.0] {
            assert!((assoc_laguerre(1, 0, x).unwrap() - (1.0 - x)).abs() < 1e-15);
        }
        assert!((assoc_laguerre(2, 0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(assoc_laguerre(-1, 0, 1.0).is_err());
        assert!(assoc_laguerre(1, -2, 1.0).is_err());
    }

    #[test]
    fn laguerre_at_zero_is_binomial() {
        for n in 0..20 {
            for k in 0..6 {
                let binom = (ln_factorial((n + k) as u64) - ln_factorial(n as u64) - ln_factorial(k as u64)).exp();
                let got = assoc_laguerre(n, k, 0.0).unwrap();
                assert!((got - binom).abs() < 1e-9 * binom, "L_{n}^{k}(0) = {got}, want {binom}");
            }
        }
    }

    #[test]
    fn hyp2f1_small_cases() {
        for &z in &[-3.0, -0.5, 0.0, 1.2, 2.9] {
            assert_eq!(hyp2f1_terminating(0, 5, z), 1.0);
            assert!((hyp2f1_terminating(1, 1, z) - (1.0 - z / 2.0)).abs() < 1e-15);
        }
        assert_eq!(hyp2f1_terminating(0, 0, 7.0), 1.0);
    }

    /// Exact rational evaluation of the truncated sum with z = p/q.
    fn hyp2f1_rational(m: i64, n: i64, p: i64, q: i64) -> f64 {
        // accumulate as num/den with i128
        fn gcd(a: i128, b: i128) -> i128 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let (mut tn, mut td): (i128, i128) = (1, 1);
        let (mut sn, mut sd): (i128, i128) = (1, 1);
        for k in 0..m.min(n) {
            let k = k as i128;
            tn *= (k - m as i128) * (k - n as i128) * p as i128;
            td *= (k - m as i128 - n as i128) * (k + 1) * q as i128;
            let g = gcd(tn, td);
            tn /= g;
            td /= g;
            sn = sn * td + tn * sd;
            sd *= td;
            let g = gcd(sn, sd);
            sn /= g;
            sd /= g;
        }
        sn as f64 / sd as f64
    }

    #[test]
    fn hyp2f1_matches_rational_arithmetic() {
        for m in 0..=8u32 {
            for n in 0..=8u32 {
                for p in -12..=12i64 {
                    let z = p as f64 / 4.0;
                    let want = hyp2f1_rational(m as i64, n as i64, p, 4);
                    let got = hyp2f1_terminating(m, n, z);
                    assert!(
                        (got - want).abs() < 1e-12 * want.abs().max(1.0),
                        "({m},{n},{z}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn ln_factorial_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-15);
        // continuity across the table boundary
        let direct: f64 = (2..=300u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(300) - direct).abs() < 1e-14 * direct);
        let direct: f64 = (2..=1_000_000u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(1_000_000) - direct).abs() < 1e-12 * direct);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bessel_recurrence(n in -40i32..40, x in 0.05f64..49.0) {
                let r = bessel_j(n - 1, x).unwrap() + bessel_j(n + 1, x).unwrap()
                    - 2.0 * n as f64 / x * bessel_j(n, x).unwrap();
                prop_assert!(r.abs() < 1e-10);
            }

            #[test]
            fn hyp2f1_symmetric(m in 0u32..12, n in 0u32..12, z in -3.0f64..3.0) {
                let a = hyp2f1_terminating(m, n, z);
                let b = hyp2f1_terminating(n, m, z);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
