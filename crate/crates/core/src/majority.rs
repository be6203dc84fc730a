//! The majority-vote rule: exact, conditional and asymptotic fold
//! covariance, the fold-count minimizer and the CV mean-squared error.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::combinatorics::{
    binomial, binomial_row, central_mass, central_mass_f64, dyadic, ln_binomial, rational, to_f64,
};
use crate::error::{Error, Result};
use crate::rule::LearningRule;
use crate::types::{ExactValue, Hypothesis, HypothesisMixture, LabeledPoint};

/// Outputs the constant-0 hypothesis iff at most half the training labels
/// are 1 (ties go to 0), the constant-1 hypothesis otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityRule;

pub fn majority_rule() -> MajorityRule {
    MajorityRule
}

impl MajorityRule {
    pub fn predict(labels_sum: usize, len: usize) -> u32 {
        u32::from(2 * labels_sum > len)
    }
}

impl LearningRule for MajorityRule {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        let mut ones = 0;
        for z in sample {
            match z.y {
                0 => {}
                1 => ones += 1,
                y => return Err(Error::DomainMismatch(format!("majority needs binary labels, got {y}"))),
            }
        }
        Ok(HypothesisMixture::single(Hypothesis::constant(Self::predict(ones, sample.len()))))
    }

    fn name(&self) -> String {
        "majority".into()
    }
}

/// `S_r = 2^{-2r} binom(2r, r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralMass {
    pub r: usize,
    pub value: ExactValue,
}

impl CentralMass {
    pub fn new(r: usize) -> Self {
        CentralMass { r, value: central_mass(r) }
    }
}

fn check_fold(n: usize, m: usize) -> Result<()> {
    if m == 0 || !n.is_multiple_of(m) || 2 * m > n {
        return Err(Error::InvalidFoldSize { n, m });
    }
    Ok(())
}

/// Exact covariance of two fold losses under `Ber(1/2)` labels:
/// `2^{-n} sum_{j<m} binom(m-1, j)^2 binom(n-2m, floor((n-m)/2) - j)`.
pub fn cov_exact(n: usize, m: usize) -> Result<ExactValue> {
    check_fold(n, m)?;
    let big_n = n - 2 * m;
    let centre = ((n - m) / 2) as i64;
    let inner = binomial_row(m - 1);
    let outer = binomial_row(big_n);
    let mut total = BigUint::zero();
    for (j, c) in inner.iter().enumerate() {
        let idx = centre - j as i64;
        if idx < 0 || idx > big_n as i64 {
            continue;
        }
        total += c * c * &outer[idx as usize];
    }
    Ok(dyadic(total, n))
}

/// The same covariance conditioned on the label sum `Y ~ Bin(n - 2m, 1/2)`
/// outside the two folds: `E_Y[P(Bin(m-1, 1/2) = floor((n-m)/2 - Y))^2] / 4`.
pub fn cov_conditional(n: usize, m: usize) -> Result<ExactValue> {
    check_fold(n, m)?;
    let big_n = n - 2 * m;
    let inner = binomial_row(m - 1);
    let outer = binomial_row(big_n);
    let mut total = BigUint::zero();
    for (y, weight) in outer.iter().enumerate() {
        let t = (n as i64 - m as i64 - 2 * y as i64).div_euclid(2);
        if t < 0 || t > m as i64 - 1 {
            continue;
        }
        let p = &inner[t as usize];
        total += weight * p * p;
    }
    Ok(dyadic(total, big_n + 2 * (m - 1) + 2))
}

/// Covariance by enumerating all `2^n` labelings (folds 1 and 2).
pub fn cov_brute_force(n: usize, m: usize) -> Result<ExactValue> {
    check_fold(n, m)?;
    if n > 24 {
        return Err(Error::OutOfRange(format!("brute force limited to n <= 24, got {n}")));
    }
    let block = (1u32 << m) - 1;
    let (mut s1, mut s2, mut s12) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        let total = mask.count_ones() as usize;
        let loss = |i: usize| -> u64 {
            let y = ((mask >> (i * m)) & block).count_ones() as usize;
            if MajorityRule::predict(total - y, n - m) == 1 {
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
    let scale = BigInt::from(m * m);
    let e12 = BigRational::new(BigInt::from(s12), scale.clone() << n);
    let e1 = BigRational::new(BigInt::from(s1), BigInt::from(m) << n);
    let e2 = BigRational::new(BigInt::from(s2), BigInt::from(m) << n);
    Ok(e12 - e1 * e2)
}

/// `cov_exact(n, 1) = 2^{-n} binom(n-2, floor((n-1)/2))`.
pub fn cov_single_exact(n: usize) -> Result<ExactValue> {
    check_fold(n, 1)?;
    Ok(dyadic(binomial(n as i64 - 2, ((n - 1) / 2) as i64), n))
}

/// `cov_exact(n, n/2) = (2^{-(m-1)} binom(m-1, floor(m/2)))^2 / 4`.
pub fn cov_half_exact(n: usize) -> Result<ExactValue> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidFoldSize { n, m: n / 2 });
    }
    let m = n / 2;
    let p = dyadic(binomial(m as i64 - 1, (m / 2) as i64), m - 1);
    Ok(&p * &p / rational(4, 1))
}

/// Large-`n` limit of the two-fold covariance, `1/(pi (n-2))`.
pub fn half_asymptote(n: usize) -> f64 {
    1.0 / (PI * (n as f64 - 2.0))
}

/// Named approximations of the fold covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproxForm {
    /// `S_{m-1} / (2 sqrt(pi (2n - 3m)))`.
    Binomial,
    /// `(1 - 1/(8(m-1))) / (2 pi sqrt((m-1)(2n-3m)))`.
    Sublinear,
    /// The exact single-point-fold expression.
    M1,
    /// The exact two-fold expression.
    Half,
    /// `1 / (2 pi sqrt((m-1)(2n-3m)))`.
    Large,
}

impl ApproxForm {
    pub const ALL: [ApproxForm; 5] =
        [ApproxForm::Binomial, ApproxForm::Sublinear, ApproxForm::M1, ApproxForm::Half, ApproxForm::Large];

    pub fn as_str(&self) -> &'static str {
        match self {
            ApproxForm::Binomial => "binomial",
            ApproxForm::Sublinear => "sublinear",
            ApproxForm::M1 => "m1",
            ApproxForm::Half => "half",
            ApproxForm::Large => "large",
        }
    }

    /// The most accurate form defined at `(n, m)`.
    pub fn preferred(n: usize, m: usize) -> ApproxForm {
        if m == 1 {
            ApproxForm::M1
        } else if 2 * m == n {
            ApproxForm::Half
        } else if 3 * m <= n {
            ApproxForm::Sublinear
        } else {
            ApproxForm::Binomial
        }
    }
}

impl fmt::Display for ApproxForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApproxForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ApproxForm::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown approximation form `{s}`")))
    }
}

/// `2^{-n} binom(a, b)` in floating point.
fn scaled_binomial(a: usize, b: usize, n: usize) -> f64 {
    if n < 1000 {
        to_f64(&dyadic(binomial(a as i64, b as i64), n))
    } else {
        (ln_binomial(a as f64, b as f64) - n as f64 * std::f64::consts::LN_2).exp()
    }
}

/// Evaluates an approximation of the fold covariance in floating point.
pub fn cov_approx(n: usize, m: usize, form: ApproxForm) -> Result<f64> {
    let domain = || Error::FormDomain { form: form.as_str().into(), n, m };
    if m == 0 || 2 * m > n {
        return Err(domain());
    }
    let (nf, mf) = (n as f64, m as f64);
    match form {
        ApproxForm::Binomial => Ok(central_mass_f64(m - 1) / (2.0 * (PI * (2.0 * nf - 3.0 * mf)).sqrt())),
        ApproxForm::Sublinear | ApproxForm::Large => {
            if m < 2 || 3 * m > n {
                return Err(domain());
            }
            let base = 1.0 / (2.0 * PI * ((mf - 1.0) * (2.0 * nf - 3.0 * mf)).sqrt());
            if form == ApproxForm::Sublinear {
                Ok(base * (1.0 - 1.0 / (8.0 * (mf - 1.0))))
            } else {
                Ok(base)
            }
        }
        ApproxForm::M1 => {
            if m != 1 {
                return Err(domain());
            }
            Ok(scaled_binomial(n - 2, (n - 1) / 2, n))
        }
        ApproxForm::Half => {
            if 2 * m != n {
                return Err(domain());
            }
            let p = scaled_binomial(m - 1, m / 2, m - 1);
            Ok(p * p / 4.0)
        }
    }
}

/// CV mean-squared error of majority under `Ber(1/2)` labels:
/// `((k-1)/k) cov_exact(n, m) + 1/(4n)`.
pub fn mse_majority(n: usize, m: usize) -> Result<ExactValue> {
    if m == 0 || !n.is_multiple_of(m) {
        return Err(Error::InvalidFoldSize { n, m });
    }
    let k = (n / m) as i64;
    let floor = rational(1, 4 * n as i64);
    if k == 1 {
        return Ok(floor);
    }
    Ok(rational(k - 1, k) * cov_exact(n, m)? + floor)
}

/// One row of the divisor table.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorityCovRow {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub cov_exact: ExactValue,
    pub cov_conditional: ExactValue,
    pub approx_form: ApproxForm,
    pub cov_approx: f64,
    pub mse: ExactValue,
    /// Whether `n - m` is odd (the tie-free case of the conditional form).
    pub n_minus_m_odd: bool,
}

impl MajorityCovRow {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        let cov = cov_exact(n, m)?;
        let form = ApproxForm::preferred(n, m);
        Ok(MajorityCovRow {
            n,
            m,
            k: n / m,
            cov_conditional: cov_conditional(n, m)?,
            approx_form: form,
            cov_approx: cov_approx(n, m, form)?,
            mse: mse_majority(n, m)?,
            cov_exact: cov,
            n_minus_m_odd: (n - m) % 2 == 1,
        })
    }

    pub fn forms_agree(&self) -> bool {
        self.cov_exact == self.cov_conditional
    }
}

/// Result of the divisor sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub m_star: usize,
    pub k_star: usize,
    pub table: Vec<MajorityCovRow>,
}

/// Evaluates the exact covariance at every divisor `m <= n/2` of `n` and
/// returns the minimizing fold size.
pub fn minimize_cov(n: usize) -> Result<Minimizer> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let divisors: Vec<usize> = (1..=n / 2).filter(|m| n.is_multiple_of(*m)).collect();
    let table: Vec<MajorityCovRow> = divisors.par_iter().map(|&m| MajorityCovRow::new(n, m)).collect::<Result<_>>()?;
    let best = table
        .iter()
        .min_by(|a, b| a.cov_exact.cmp(&b.cov_exact).then(b.m.cmp(&a.m)))
        .expect("n >= 2 has the divisor 1");
    Ok(Minimizer { m_star: best.m, k_star: best.k, table })
}

/// Binomial masses with prefix sums for range probabilities.
struct BinomialTable {
    prefix: Vec<f64>,
}

impl BinomialTable {
    fn new(n: usize, p: f64) -> Self {
        let mut pmf = vec![0.0; n + 1];
        if p <= 0.0 {
            pmf[0] = 1.0;
        } else if p >= 1.0 {
            pmf[n] = 1.0;
        } else {
            let (lp, lq) = (p.ln(), (1.0 - p).ln());
            for (x, v) in pmf.iter_mut().enumerate() {
                *v = (ln_binomial(n as f64, x as f64) + x as f64 * lp + (n - x) as f64 * lq).exp();
            }
        }
        let mut prefix = Vec::with_capacity(n + 2);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &pmf {
            acc += v;
            prefix.push(acc);
        }
        BinomialTable { prefix }
    }

    fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    fn pmf(&self, x: usize) -> f64 {
        self.prefix[x + 1] - self.prefix[x]
    }

    /// `P(lo <= X <= hi)` with the bounds clipped to the support.
    fn range(&self, lo: i64, hi: i64) -> f64 {
        let top = self.len() as i64 - 1;
        let (lo, hi) = (lo.max(0), hi.min(top));
        if lo > hi {
            0.0
        } else {
            self.prefix[hi as usize + 1] - self.prefix[lo as usize]
        }
    }
}

/// CV mean-squared error of majority with `Ber(p)` labels, in floating point.
///
/// Everything is a function of fold label sums, which are independent
/// binomials, so each second moment is a sum over at most two fold sums with
/// the rest handled by range probabilities.
pub fn mse_bernoulli(n: usize, m: usize, p: f64) -> Result<f64> {
    if m == 0 || !n.is_multiple_of(m) {
        return Err(Error::InvalidFoldSize { n, m });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("label probability {p}")));
    }
    let k = n / m;
    let mf = m as f64;
    let fold = BinomialTable::new(m, p);
    let whole = BinomialTable::new(n, p);
    let rest = BinomialTable::new(n - m, p);
    // training set of size n - m predicts 1 iff its label sum exceeds this
    let thr = ((n - m) / 2) as i64;
    let loss = |y: usize, predicts_one: bool| if predicts_one { (m - y) as f64 / mf } else { y as f64 / mf };
    let risk = |predicts_one: bool| if predicts_one { 1.0 - p } else { p };

    let full_one = whole.range(n as i64 / 2 + 1, n as i64);
    let l_sq = risk(true).powi(2) * full_one + risk(false).powi(2) * (1.0 - full_one);

    let mut hold_sq = 0.0;
    let mut cross = 0.0;
    for y in 0..=m {
        let py = fold.pmf(y);
        if py == 0.0 {
            continue;
        }
        // c = label sum of the complement; the full model predicts 1 iff y + c > n/2
        let full_cut = n as i64 / 2 - y as i64;
        let c_one = rest.range(thr + 1, (n - m) as i64);
        hold_sq += py * (loss(y, true).powi(2) * c_one + loss(y, false).powi(2) * (1.0 - c_one));
        for (fold_one, lo, hi) in [(false, 0, thr), (true, thr + 1, (n - m) as i64)] {
            let full_one = rest.range(lo.max(full_cut + 1), hi);
            let full_zero = rest.range(lo, hi.min(full_cut));
            cross += py * loss(y, fold_one) * (risk(true) * full_one + risk(false) * full_zero);
        }
    }

    let mut pair = 0.0;
    if k >= 2 {
        let others = BinomialTable::new(n - 2 * m, p);
        let top = (n - 2 * m) as i64;
        for y1 in 0..=m {
            let p1 = fold.pmf(y1);
            if p1 == 0.0 {
                continue;
            }
            for y2 in 0..=m {
                let p2 = fold.pmf(y2);
                if p2 == 0.0 {
                    continue;
                }
                // fold 1 model sees y2 + r, fold 2 model sees y1 + r
                let c1 = thr - y2 as i64;
                let c2 = thr - y1 as i64;
                let (lo_cut, hi_cut) = (c1.min(c2), c1.max(c2));
                let mut acc = 0.0;
                // r <= lo_cut: both predict 0
                acc += others.range(0, lo_cut) * loss(y1, false) * loss(y2, false);
                // lo_cut < r <= hi_cut: exactly one predicts 1
                let mid = others.range(lo_cut + 1, hi_cut);
                if mid > 0.0 {
                    let one_first = c1 < c2;
                    acc += mid * loss(y1, one_first) * loss(y2, !one_first);
                }
                acc += others.range(hi_cut + 1, top) * loss(y1, true) * loss(y2, true);
                pair += p1 * p2 * acc;
            }
        }
    }
    let kf = k as f64;
    let cv_sq = hold_sq / kf + (kf - 1.0) / kf * pair;
    Ok((cv_sq - 2.0 * cross + l_sq).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{exact_functional, Functional, DEFAULT_BUDGET};
    use crate::types::FiniteDistribution;

    #[test]
    fn rule_examples() {
        let r = MajorityRule;
        let pred = |labels: &[u32]| {
            let pts: Vec<_> = labels.iter().map(|&y| LabeledPoint::token(0, y)).collect();
            r.train(&pts).unwrap().atoms()[0].0.clone()
        };
        assert_eq!(pred(&[0, 0, 1]), Hypothesis::constant(0));
        assert_eq!(pred(&[1, 1, 0, 0]), Hypothesis::constant(0));
        assert_eq!(pred(&[1, 1, 1, 0]), Hypothesis::constant(1));
    }

    #[test]
    fn small_covariances() {
        assert_eq!(cov_exact(2, 1).unwrap(), rational(1, 4));
        assert_eq!(cov_exact(4, 1).unwrap(), rational(1, 8));
        assert_eq!(cov_exact(4, 2).unwrap(), rational(1, 16));
        assert_eq!(cov_conditional(4, 1).unwrap(), rational(1, 8));
        assert_eq!(cov_conditional(4, 2).unwrap(), rational(1, 16));
        assert_eq!(cov_conditional(9, 3).unwrap(), cov_exact(9, 3).unwrap());
        assert!(matches!(cov_exact(5, 2), Err(Error::InvalidFoldSize { .. })));
        assert!(matches!(cov_exact(4, 3), Err(Error::InvalidFoldSize { .. })));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_majority(4, 2).unwrap(), rational(3, 32));
        assert_eq!(mse_majority(4, 1).unwrap(), rational(5, 32));
        assert_eq!(mse_majority(2, 1).unwrap(), rational(1, 4));
    }

    #[test]
    fn mse_matches_engine() {
        let dist = FiniteDistribution::bernoulli(rational(1, 2)).unwrap();
        for n in 2..=8 {
            for k in (2..=n).filter(|k| n % k == 0) {
                let engine = exact_functional(&MajorityRule, &dist, n, k, Functional::Mse, DEFAULT_BUDGET).unwrap();
                assert_eq!(engine, mse_majority(n, n / k).unwrap(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn approximations() {
        assert!((cov_approx(10, 1, ApproxForm::M1).unwrap() - 70.0 / 1024.0).abs() < 1e-15);
        assert!(matches!(cov_approx(10, 2, ApproxForm::M1), Err(Error::FormDomain { .. })));
        assert!(matches!(cov_approx(12, 5, ApproxForm::Sublinear), Err(Error::FormDomain { .. })));
        let half = cov_approx(100, 50, ApproxForm::Half).unwrap();
        assert!((half - to_f64(&cov_half_exact(100).unwrap())).abs() < 1e-15);
        assert!((half - half_asymptote(100)).abs() / half < 0.04);
        let far = cov_approx(10_000, 5_000, ApproxForm::Half).unwrap();
        assert!((far - half_asymptote(10_000)).abs() / far < 1e-3);
        let big = cov_approx(5000, 2500, ApproxForm::Half).unwrap();
        assert!((big - to_f64(&cov_half_exact(5000).unwrap())).abs() / big < 1e-9);
    }

    #[test]
    fn bernoulli_mse_matches_exact_at_one_half() {
        for (n, m) in [(12, 4), (12, 3), (30, 10), (30, 1), (60, 30), (8, 8)] {
            let exact = to_f64(&mse_majority(n, m).unwrap());
            let float = mse_bernoulli(n, m, 0.5).unwrap();
            assert!((exact - float).abs() < 1e-12, "n={n} m={m}: {exact} vs {float}");
        }
    }

    #[test]
    fn bernoulli_mse_matches_engine_off_centre() {
        let dist = FiniteDistribution::bernoulli(rational(1, 3)).unwrap();
        for (n, k) in [(6, 2), (6, 3), (8, 4)] {
            let engine = exact_functional(&MajorityRule, &dist, n, k, Functional::Mse, DEFAULT_BUDGET).unwrap();
            let float = mse_bernoulli(n, n / k, 1.0 / 3.0).unwrap();
            assert!((to_f64(&engine) - float).abs() < 1e-12, "n={n} k={k}");
        }
    }
}
