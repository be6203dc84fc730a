//! The square-wave rule: exact fold covariance through the factorization
//! over shared points, theta-function constants and the `c0 / m` prediction.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::combinatorics::{binomial_row, pow2};
use crate::error::{Error, Result};
use crate::rule::LearningRule;
use crate::types::{ExactValue, Hypothesis, HypothesisMixture, LabeledPoint};

/// Outputs the constant-0 hypothesis iff `floor(sum(y) / sqrt(r))` is even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareWaveRule {
    pub r: usize,
}

pub fn square_wave_rule(r: usize) -> Result<SquareWaveRule> {
    if r == 0 {
        return Err(Error::InvalidParameter("wave scale must be at least 1".into()));
    }
    Ok(SquareWaveRule { r })
}

impl SquareWaveRule {
    pub fn predict(&self, labels_sum: usize) -> u32 {
        u32::from(epsilon_floor(labels_sum as u64, self.r as u64) < 0)
    }
}

impl LearningRule for SquareWaveRule {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        let mut ones = 0;
        for z in sample {
            match z.y {
                0 => {}
                1 => ones += 1,
                y => return Err(Error::DomainMismatch(format!("square wave needs binary labels, got {y}"))),
            }
        }
        Ok(HypothesisMixture::single(Hypothesis::constant(self.predict(ones))))
    }

    fn name(&self) -> String {
        format!("square-wave-{}", self.r)
    }
}

/// `floor(u / sqrt(m))`, from the integer test `t^2 m <= u^2 < (t+1)^2 m`.
pub fn floor_over_sqrt(u: u64, m: u64) -> u64 {
    let target = u as u128 * u as u128;
    let m = m as u128;
    let mut t = (target / m).isqrt();
    while t * t * m > target {
        t -= 1;
    }
    while (t + 1) * (t + 1) * m <= target {
        t += 1;
    }
    t as u64
}

/// `(-1)^floor(u / sqrt(m))`.
pub fn epsilon_floor(u: u64, m: u64) -> i8 {
    assert!(m >= 1, "epsilon_floor needs m >= 1");
    if floor_over_sqrt(u, m).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Instance of the square-wave covariance problem with wave scale `r = m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareWaveParams {
    pub r: usize,
    pub n: usize,
    pub m: usize,
    /// Points shared by the two training sets, `n - 2m`.
    pub shared: usize,
    /// `shared / m`.
    pub ratio: usize,
}

impl SquareWaveParams {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 || !n.is_multiple_of(m) || 2 * m > n {
            return Err(Error::InvalidFoldSize { n, m });
        }
        let shared = n - 2 * m;
        Ok(SquareWaveParams { r: m, n, m, shared, ratio: shared / m })
    }
}

/// `2^m m f(s / sqrt(m))` as an integer:
/// `sum_w binom(m, w) (w - m/2) eps(s + w)` scaled by 2.
fn f_scaled(s: usize, m: usize, row: &[BigUint]) -> BigInt {
    let mut acc = BigInt::zero();
    for (w, b) in row.iter().enumerate() {
        let term = BigInt::from(b.clone()) * (2 * w as i64 - m as i64);
        if epsilon_floor((s + w) as u64, m as u64) > 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// `f(s / sqrt(m)) = E_W[(W/m - 1/2) eps((s + W) / sqrt(m))]`, `W ~ Bin(m, 1/2)`.
pub fn f_exact(s: usize, m: usize) -> Result<ExactValue> {
    if m == 0 {
        return Err(Error::InvalidParameter("fold size must be positive".into()));
    }
    let row = binomial_row(m);
    let den = BigInt::from(pow2(m)) * (2 * m);
    Ok(BigRational::new(f_scaled(s, m, &row), den))
}

/// Fold covariance `E_S[f(S / sqrt(m))^2]`, `S ~ Bin(n - 2m, 1/2)`, with `r = m`.
pub fn cov_exact_factorized(n: usize, m: usize) -> Result<ExactValue> {
    let p = SquareWaveParams::new(n, m)?;
    let row = binomial_row(m);
    let outer = binomial_row(p.shared);
    let terms: Vec<BigInt> = (0..=p.shared)
        .into_par_iter()
        .map(|s| {
            let f = f_scaled(s, m, &row);
            BigInt::from(outer[s].clone()) * &f * &f
        })
        .collect();
    let num: BigInt = terms.into_iter().sum();
    let den = BigInt::from(pow2(p.shared + 2 * m)) * (4 * m * m);
    Ok(BigRational::new(num, den))
}

/// Covariance of the first two fold losses over all `2^n` labelings.
pub fn cov_brute_force(n: usize, m: usize) -> Result<ExactValue> {
    SquareWaveParams::new(n, m)?;
    if n > 24 {
        return Err(Error::OutOfRange(format!("brute force limited to n <= 24, got {n}")));
    }
    let rule = SquareWaveRule { r: m };
    let block = (1u32 << m) - 1;
    let (mut s1, mut s2, mut s12) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        let total = mask.count_ones() as usize;
        let loss = |i: usize| -> u64 {
            let y = ((mask >> (i * m)) & block).count_ones() as usize;
            if rule.predict(total - y) == 1 {
                (m - y) as u64
            } else {
                y as u64
            }
        };
        let (a, b) = (loss(0), loss(1));
        s1 += a;
        s2 += b;
        s12 += a * b;
    }
    let e12 = BigRational::new(BigInt::from(s12), BigInt::from(m * m) << n);
    let e1 = BigRational::new(BigInt::from(s1), BigInt::from(m) << n);
    let e2 = BigRational::new(BigInt::from(s2), BigInt::from(m) << n);
    Ok(e12 - e1 * e2)
}

/// `C_j = exp(-pi^2 (2j+1)^2 / 8)` for `j = 0..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSeries {
    pub coefficients: Vec<f64>,
    pub truncation: usize,
}

impl ThetaSeries {
    pub fn new(truncation: usize) -> Self {
        let coefficients = (0..=truncation).map(theta_coefficient).collect();
        ThetaSeries { coefficients, truncation }
    }

    /// Bound on `sum_{j > J} C_j`.
    pub fn tail_bound(&self) -> f64 {
        theta_coefficient(self.truncation + 1) / (1.0 - theta_coefficient(1) / theta_coefficient(0))
    }

    pub fn eval(&self, delta: f64) -> f64 {
        (2.0 * PI).sqrt()
            * self
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| c * ((2 * j + 1) as f64 * PI * delta).cos())
                .sum::<f64>()
    }
}

fn theta_coefficient(j: usize) -> f64 {
    let a = (2 * j + 1) as f64;
    (-PI * PI * a * a / 8.0).exp()
}

/// Evaluation strategies for `Theta(delta) = sum_j (-1)^j exp(-2 (j - delta)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMethod {
    /// Direct sum over `-J <= j <= J + 1`.
    Lattice,
    /// Cosine series from alternating Poisson summation.
    Series,
}

pub fn theta_eval(delta: f64, method: ThetaMethod, truncation: usize) -> Result<f64> {
    if truncation < 3 {
        return Err(Error::InvalidParameter(format!("truncation must be at least 3, got {truncation}")));
    }
    Ok(match method {
        ThetaMethod::Lattice => {
            let j = truncation as i64;
            (-j..=j + 1)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (-2.0 * (j as f64 - delta).powi(2)).exp()
                })
                .sum()
        }
        ThetaMethod::Series => ThetaSeries::new(truncation).eval(delta),
    })
}

/// Truncation used for the constants; the dropped tails are below `1e-10`.
pub const CONSTANT_TRUNCATION: usize = 6;

/// Leading constant of `m * cov`, its first correction and the lattice sum
/// entering the boundary term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqConstants {
    pub c0: f64,
    pub c1: f64,
    pub c_alpha: f64,
    /// Bound on the truncation error of each constant.
    pub tail: f64,
}

impl SqConstants {
    /// `2 c1 e^{-pi^2 R / 2} + C_alpha / (pi^2 (1 + 2R)) e^{-pi^2 (1 + 2R) / 4}`.
    pub fn delta(&self, ratio: f64) -> f64 {
        let pi2 = PI * PI;
        2.0 * self.c1 * (-pi2 * ratio / 2.0).exp()
            + self.c_alpha / (pi2 * (1.0 + 2.0 * ratio)) * (-pi2 * (1.0 + 2.0 * ratio) / 4.0).exp()
    }
}

pub fn squarewave_constants() -> SqConstants {
    let series = ThetaSeries::new(CONSTANT_TRUNCATION + 1);
    let c = &series.coefficients;
    let j = CONSTANT_TRUNCATION;
    let c0 = 0.5 * c[..=j].iter().map(|x| x * x).sum::<f64>();
    let c1 = 0.25 * c[0] * c[0] + 0.5 * (0..=j).map(|i| c[i] * c[i + 1]).sum::<f64>();
    let pi2 = PI * PI;
    let c_alpha = 1.0 + 2.0 * (1..=j).map(|p| (-pi2 * (p * p) as f64 / 4.0).exp()).sum::<f64>();
    let tail =
        series.tail_bound().max(2.0 * (-pi2 * ((j + 1) * (j + 1)) as f64 / 4.0).exp() / (1.0 - (-pi2 / 4.0).exp()));
    SqConstants { c0, c1, c_alpha, tail }
}

/// Calibration constant of the `m^{-3/2}` remainder.
pub const REMAINDER_SCALE: f64 = 1.0;

/// `(c0 / m, Delta(R) / m + m^{-3/2})` for the fold covariance at `n = m (R + 2)`.
pub fn predicted_cov(m: usize, ratio: usize) -> Result<(f64, f64)> {
    if ratio == 0 {
        return Err(Error::RTooSmall);
    }
    if m == 0 {
        return Err(Error::InvalidParameter("fold size must be positive".into()));
    }
    let k = squarewave_constants();
    let mf = m as f64;
    Ok((k.c0 / mf, k.delta(ratio as f64) / mf + REMAINDER_SCALE * mf.powf(-1.5)))
}

/// One row of the covariance-versus-prediction table.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareWaveRow {
    pub n: usize,
    pub m: usize,
    pub ratio: usize,
    pub cov_exact: ExactValue,
    pub c0_over_m: f64,
    pub abs_err: f64,
    pub bound: f64,
    pub within_bound: bool,
}

impl SquareWaveRow {
    pub fn new(m: usize, ratio: usize) -> Result<Self> {
        let n = m * (ratio + 2);
        let cov_exact = cov_exact_factorized(n, m)?;
        let (value, bound) = predicted_cov(m, ratio)?;
        let abs_err = (cov_exact.to_f64().unwrap_or(f64::NAN) - value).abs();
        Ok(SquareWaveRow { n, m, ratio, cov_exact, c0_over_m: value, abs_err, bound, within_bound: abs_err <= bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{rational, to_f64};
    use crate::engine::{exact_functional, Functional, DEFAULT_BUDGET};
    use crate::types::{FiniteDistribution, SampleTuple};

    #[test]
    fn rule_examples() {
        let point = |y| LabeledPoint::token(0, y);
        let h = |r: usize, labels: &[u32]| {
            let s: Vec<_> = labels.iter().map(|&y| point(y)).collect();
            square_wave_rule(r).unwrap().train(&s).unwrap().atoms()[0].0.clone()
        };
        assert_eq!(h(1, &[1, 1]), Hypothesis::constant(0));
        assert_eq!(h(2, &[1, 1, 1]), Hypothesis::constant(0));
        assert_eq!(h(4, &[1, 1, 1, 0]), Hypothesis::constant(1));
        assert!(square_wave_rule(0).is_err());
        assert!(SampleTuple::from_labels(&[2])
            .map(|s| square_wave_rule(1).unwrap().train(s.points()))
            .unwrap()
            .is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_floor(5, 4), 1);
        assert_eq!(epsilon_floor(3, 2), 1);
        assert_eq!(epsilon_floor(0, 7), 1);
        assert_eq!(epsilon_floor(3, 4), -1);
        assert_eq!(floor_over_sqrt(u32::MAX as u64, 3), (u32::MAX as f64 / 3f64.sqrt()) as u64);
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_exact(0, 1).unwrap(), rational(-1, 2));
        assert_eq!(f_exact(1, 1).unwrap(), rational(1, 2));
        assert_eq!(f_exact(0, 4).unwrap(), rational(-1, 8));
    }

    #[test]
    fn factorization_matches_brute_force() {
        assert_eq!(cov_exact_factorized(3, 1).unwrap(), rational(1, 4));
        assert_eq!(cov_exact_factorized(4, 1).unwrap(), rational(1, 4));
        for (n, m) in [(12, 4), (9, 3), (8, 2), (10, 5), (6, 1), (12, 3)] {
            assert_eq!(cov_exact_factorized(n, m).unwrap(), cov_brute_force(n, m).unwrap(), "n={n} m={m}");
        }
        assert!(cov_exact_factorized(5, 2).is_err());
        assert!(cov_exact_factorized(2, 2).is_err());
    }

    #[test]
    fn factorization_matches_engine() {
        let dist = FiniteDistribution::bernoulli(rational(1, 2)).unwrap();
        for (n, m) in [(6, 2), (6, 3), (8, 2)] {
            let rule = square_wave_rule(m).unwrap();
            let cov = exact_functional(&rule, &dist, n, n / m, Functional::FoldCov, DEFAULT_BUDGET).unwrap();
            assert_eq!(cov, cov_exact_factorized(n, m).unwrap());
        }
    }

    #[test]
    fn theta_examples() {
        for method in [ThetaMethod::Lattice, ThetaMethod::Series] {
            assert!(theta_eval(0.5, method, 5).unwrap().abs() < 1e-12);
        }
        let lattice = theta_eval(0.0, ThetaMethod::Lattice, 5).unwrap();
        let direct = 1.0 - 2.0 * (-2f64).exp() + 2.0 * (-8f64).exp() - 2.0 * (-18f64).exp();
        assert!((lattice - direct).abs() < 1e-12);
        let a = theta_eval(0.3, ThetaMethod::Lattice, 8).unwrap();
        let b = theta_eval(0.3, ThetaMethod::Series, 8).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(theta_eval(0.3, ThetaMethod::Series, 2).is_err());
    }

    #[test]
    fn constants() {
        let k = squarewave_constants();
        assert!((k.c0 - 0.0424).abs() < 1e-4);
        assert!((k.c1 - 0.0212).abs() < 1e-4);
        assert!((k.delta(1.0) - 0.000329).abs() < 1e-6);
        assert!(k.delta(1.0) < k.c0);
        assert!(k.delta(2.0) < k.delta(1.0));
        assert!(k.tail < 1e-10);
        let s = ThetaSeries::new(6);
        assert!(s.coefficients.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn prediction() {
        let (v, b) = predicted_cov(100, 2).unwrap();
        assert!((v - 4.24e-4).abs() < 1e-6);
        let k = squarewave_constants();
        assert!(b >= k.delta(2.0) / 100.0);
        assert_eq!(predicted_cov(10, 0), Err(Error::RTooSmall));
        let row = SquareWaveRow::new(256, 2).unwrap();
        assert_eq!(row.n, 1024);
        assert!(row.within_bound, "{row:?}");
        assert!(to_f64(&row.cov_exact) > 0.0);
    }
}
