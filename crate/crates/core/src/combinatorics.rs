//! Big-integer binomials, binomial masses and a few rational helpers.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::types::ExactValue;

/// `binom(n, k)` as a big integer; zero when `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Row `n` of Pascal's triangle.
pub fn binomial_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut cur = BigUint::one();
    row.push(cur.clone());
    for i in 0..n {
        cur = cur * (n - i) / (i + 1);
        row.push(cur.clone());
    }
    row
}

pub fn pow2(e: usize) -> BigUint {
    BigUint::one() << e
}

/// Exact rational `num / 2^e`.
pub fn dyadic(num: BigUint, e: usize) -> ExactValue {
    BigRational::new(BigInt::from(num), BigInt::from(pow2(e)))
}

/// `P(Bin(n, 1/2) = k)` exactly; zero outside the support.
pub fn binomial_half_pmf(n: i64, k: i64) -> ExactValue {
    if n < 0 {
        return ExactValue::zero();
    }
    dyadic(binomial(n, k), n as usize)
}

/// Central binomial mass `S_r = 2^{-2r} binom(2r, r)`.
pub fn central_mass(r: usize) -> ExactValue {
    dyadic(binomial(2 * r as i64, r as i64), 2 * r)
}

/// `ln binom(n, k)` through the log-gamma function, for arguments too large
/// to enumerate.
pub fn ln_binomial(n: f64, k: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Central mass `S_r` in floating point; exact below 512, log-gamma above.
pub fn central_mass_f64(r: usize) -> f64 {
    if r < 512 {
        to_f64(&central_mass(r))
    } else {
        let r = r as f64;
        (ln_binomial(2.0 * r, r) - 2.0 * r * std::f64::consts::LN_2).exp()
    }
}

pub fn to_f64(x: &ExactValue) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn rational(num: i64, den: i64) -> ExactValue {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(v: i64) -> ExactValue {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact `q^e` for a possibly negative exponent.
pub fn rational_pow(q: u64, e: i64) -> ExactValue {
    let base = BigInt::from(q).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

/// Formats a rational as `p/q` (or `p` when integral).
pub fn format_exact(x: &ExactValue) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `p/q` or an integer into an exact rational.
pub fn parse_exact(s: &str) -> Option<ExactValue> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                None
            } else {
                Some(BigRational::new(p, q))
            }
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(5, -1), BigUint::zero());
        assert_eq!(binomial(5, 6), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(binomial_row(6)[2], BigUint::from(15u32));
    }

    #[test]
    fn central_mass_decreases() {
        assert_eq!(central_mass(0), integer(1));
        assert_eq!(central_mass(1), rational(1, 2));
        for r in 0..40 {
            assert!(central_mass(r + 1) < central_mass(r));
        }
        let exact = to_f64(&central_mass(600));
        let approx = {
            let r = 600.0;
            (ln_binomial(2.0 * r, r) - 2.0 * r * std::f64::consts::LN_2).exp()
        };
        assert!((exact - approx).abs() / exact < 1e-10);
    }

    #[test]
    fn huge_rationals_convert() {
        // 2^{-3000} binom(3000, 1500) ~ 0.0146
        let v = binomial_half_pmf(3000, 1500);
        let f = to_f64(&v);
        assert!((f - (2.0 / (std::f64::consts::PI * 3000.0)).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn exact_text_roundtrip() {
        let x = rational(-7, 12);
        assert_eq!(format_exact(&x), "-7/12");
        assert_eq!(parse_exact("-7/12"), Some(x));
        assert_eq!(parse_exact("3"), Some(integer(3)));
        assert_eq!(parse_exact("1/0"), None);
    }
}
