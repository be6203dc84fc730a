//! The randomized consistent linear learner and its loss, variance, fold
//! noise and CV mean-squared error.

use std::fmt;

use num_traits::{FromPrimitive, Num, One, Zero};

use super::field::{solve, Echelon, FqMatrix, LinearHypothesis, PrimeField};
use super::rank::{RankDistribution, RANK_ENVELOPE};
use crate::combinatorics::{rational, rational_pow, to_f64};
use crate::engine::{finish, mc_pass, mean_and_error, EstimateWithError};
use crate::error::{Error, Result};
use crate::rule::LearningRule;
use crate::types::{partition_folds, ExactValue, Feature, FoldScheme, Hypothesis, HypothesisMixture, LabeledPoint};

/// How [`LinearRule`] exposes its output law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMode {
    /// Every consistent functional as an explicit atom.
    Coset,
    /// Ground truth with probability `q^{r-d}`, otherwise a surrogate with
    /// closed-form risk `1 - 1/q`; risks are relative to features uniform on
    /// `F_q^d` labeled by the ground truth.
    Conditional,
}

/// Outputs a uniformly random linear functional consistent with the sample.
#[derive(Debug, Clone)]
pub struct LinearRule {
    pub field: PrimeField,
    pub truth: Vec<u32>,
    pub mode: LinearMode,
    /// Largest coset listed explicitly in [`LinearMode::Coset`].
    pub max_atoms: usize,
}

/// Linear learner over `F_q^d` with the zero functional as ground truth.
pub fn linear_rule(d: usize, q: u32) -> Result<LinearRule> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(LinearRule { field: PrimeField::new(q)?, truth: vec![0; d], mode: LinearMode::Coset, max_atoms: 1 << 16 })
}

impl LinearRule {
    pub fn with_truth(mut self, truth: Vec<u32>) -> Self {
        self.truth = truth;
        self
    }

    pub fn with_mode(mut self, mode: LinearMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn dimension(&self) -> usize {
        self.truth.len()
    }

    /// Probability of returning the ground truth from a rank-`r` sample.
    pub fn correct_probability(&self, rank: usize) -> ExactValue {
        rational_pow(self.field.q() as u64, rank as i64 - self.dimension() as i64)
    }

    fn system(&self, sample: &[LabeledPoint]) -> Result<(FqMatrix, Vec<u32>)> {
        let d = self.dimension();
        let mut rows = Vec::with_capacity(sample.len());
        let mut y = Vec::with_capacity(sample.len());
        for z in sample {
            match &z.x {
                Feature::Vector(v) if v.len() == d => rows.push(v.clone()),
                other => return Err(Error::DomainMismatch(format!("expected a vector of length {d}, got {other:?}"))),
            }
            if z.y >= self.field.q() {
                return Err(Error::DomainMismatch(format!("label {} outside Z_{}", z.y, self.field.q())));
            }
            y.push(z.y);
        }
        Ok((FqMatrix::from_rows(&rows, d, self.field)?, y))
    }

    /// One concrete run of the rule.
    pub fn sample_hypothesis<R: rand::Rng + ?Sized>(
        &self,
        sample: &[LabeledPoint],
        rng: &mut R,
    ) -> Result<LinearHypothesis> {
        let (x, y) = self.system(sample)?;
        let coset = solve(&x, &y)?;
        Ok(LinearHypothesis { coeffs: coset.sample(rng), q: self.field.q() })
    }
}

impl LearningRule for LinearRule {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        let (x, y) = self.system(sample)?;
        let q = self.field.q();
        match self.mode {
            LinearMode::Coset => {
                let coset = solve(&x, &y)?;
                let size = (q as u128).saturating_pow(coset.dimension() as u32);
                if size > self.max_atoms as u128 {
                    return Err(Error::BudgetExceeded { needed: size, budget: self.max_atoms as u128 });
                }
                let w = rational(1, size as i64);
                HypothesisMixture::new(
                    coset.elements().into_iter().map(|a| (Hypothesis::linear(a, q), w.clone())).collect(),
                )
            }
            LinearMode::Conditional => {
                solve(&x, &y)?;
                let p = self.correct_probability(x.rank());
                let truth = Hypothesis::linear(self.truth.clone(), q).with_risk(ExactValue::zero());
                if p.is_one() {
                    return Ok(HypothesisMixture::single(truth));
                }
                let wrong = Hypothesis::opaque(rational(q as i64 - 1, q as i64));
                HypothesisMixture::new(vec![(truth, p.clone()), (wrong, ExactValue::one() - p)])
            }
        }
    }

    fn name(&self) -> String {
        format!("linear-q{}-d{}", self.field.q(), self.dimension())
    }
}

/// Expected risk, the rank-weighted wrong-output mass and the risk variance
/// of the learner trained on `n_train` points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLoss {
    pub l_bar: ExactValue,
    pub s0: ExactValue,
    pub variance: ExactValue,
}

/// `L_r = (1 - q^{r-d}) (1 - 1/q)`: risk of the learner given rank `r`.
pub fn risk_given_rank(r: usize, d: usize, q: u64) -> ExactValue {
    (ExactValue::one() - rational_pow(q, r as i64 - d as i64)) * rational(q as i64 - 1, q as i64)
}

pub fn expected_loss_exact(n_train: usize, d: usize, q: u64) -> Result<LinearLoss> {
    PrimeField::new(q as u32)?;
    let ranks = RankDistribution::new(n_train, d, q)?;
    let mut s0 = ExactValue::zero();
    for (r, p) in ranks.probs.iter().enumerate() {
        s0 += (ExactValue::one() - rational_pow(q, r as i64 - d as i64)) * p;
    }
    let c = rational(q as i64 - 1, q as i64);
    Ok(LinearLoss { l_bar: &c * &s0, variance: &c * &c * &s0 * (ExactValue::one() - &s0), s0 })
}

/// Expected conditional variance of one fold's hold-out loss, with the
/// `O(1 / (m q^{|n-d| + 2 [n >= d]}))` envelope evaluated at constant 4.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldNoise {
    pub value: ExactValue,
    pub envelope: f64,
    pub within_envelope: bool,
}

pub fn fold_noise_exact(n_train: usize, d: usize, q: u64, m: usize) -> Result<FoldNoise> {
    if m == 0 {
        return Err(Error::InvalidParameter("fold size must be positive".into()));
    }
    PrimeField::new(q as u32)?;
    let ranks = RankDistribution::new(n_train, d, q)?;
    let mut total = ExactValue::zero();
    for (r, p) in ranks.probs.iter().enumerate() {
        let l = risk_given_rank(r, d, q);
        total += p * &l * (ExactValue::one() - &l);
    }
    let value = total / rational(m as i64, 1);
    let exponent = n_train.abs_diff(d) + if n_train >= d { 2 } else { 0 };
    let envelope = RANK_ENVELOPE / (m as f64 * (q as f64).powi(exponent as i32));
    Ok(FoldNoise { within_envelope: to_f64(&value) <= envelope, value, envelope })
}

/// Regimes of the CV mean-squared error of the linear learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearCase {
    /// `n < d`: decays like `q^{-(d-n)}`.
    Underdetermined,
    /// `n >= d > n - m`: bounded away from zero.
    FoldStarved,
    /// `n - m >= d`: decays like `q^{-(n-m-d+1)}`.
    Overdetermined,
}

impl LinearCase {
    pub fn number(&self) -> u8 {
        match self {
            LinearCase::Underdetermined => 1,
            LinearCase::FoldStarved => 2,
            LinearCase::Overdetermined => 3,
        }
    }
}

impl fmt::Display for LinearCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Regime and leading-order size of the CV mean-squared error.
pub fn linear_mse_bound(n: usize, m: usize, d: usize, q: u64) -> Result<(LinearCase, f64)> {
    if m == 0 || m > n {
        return Err(Error::InvalidFoldSize { n, m });
    }
    let qf = q as f64;
    Ok(if n < d {
        (LinearCase::Underdetermined, qf.powi(-((d - n) as i32)))
    } else if n - m < d {
        (LinearCase::FoldStarved, 1.0)
    } else {
        (LinearCase::Overdetermined, qf.powi(-((n - m - d + 1) as i32)))
    })
}

/// Scalar arithmetic shared by the exact and floating-point paths.
trait Scalar: Num + Clone + FromPrimitive {}
impl<T: Num + Clone + FromPrimitive> Scalar for T {}

fn lift<T: Scalar>(v: u64) -> T {
    T::from_u64(v).expect("small integers are representable")
}

/// Conditional CV mean-squared error given the feature vectors, integrating
/// the learner's randomness in closed form. Only ranks, membership of
/// held-out points in the training span, and ranks of held-out pairs matter,
/// so `rows` may be given in any coordinates.
fn conditional_mse<T: Scalar>(rows: &[Vec<u32>], field: PrimeField, d: usize, scheme: &FoldScheme) -> T {
    let width = rows.first().map_or(0, |r| r.len());
    let q: T = lift(field.q() as u64);
    let one = T::one();
    let c = one.clone() - one.clone() / q.clone();
    let wrong = |r: usize| -> T {
        let mut p = one.clone();
        for _ in r..d {
            p = p / q.clone();
        }
        one.clone() - p
    };
    let mut all = Echelon::new(width, field);
    for r in rows {
        all.insert(r);
    }
    let full_wrong = wrong(all.rank());
    let e = full_wrong.clone() * c.clone();
    let e2 = full_wrong * c.clone() * c.clone();

    let m = scheme.m;
    let mf: T = lift(m as u64);
    let kf: T = lift(scheme.k as u64);
    let mut avg = T::zero();
    let mut var = T::zero();
    for i in 0..scheme.k {
        let mut span = Echelon::new(width, field);
        for r in scheme.complement(rows, i) {
            span.insert(&r);
        }
        let residuals: Vec<Vec<u32>> = rows[scheme.block(i)].iter().map(|x| span.reduce(x)).collect();
        let outside: Vec<bool> = residuals.iter().map(|v| v.iter().any(|&x| x != 0)).collect();
        let count = outside.iter().filter(|&&o| o).count();
        let hold = c.clone() * lift::<T>(count as u64) / mf.clone();
        let mut same = 0u64;
        let mut independent = 0u64;
        for a in 0..m {
            for b in 0..m {
                if a == b || !outside[a] || !outside[b] {
                    continue;
                }
                let mut pair = Echelon::new(width, field);
                pair.insert(&residuals[a]);
                if pair.contains(&residuals[b]) {
                    same += 1;
                } else {
                    independent += 1;
                }
            }
        }
        let hold_sq = (c.clone() * lift::<T>(count as u64 + same) + c.clone() * c.clone() * lift::<T>(independent))
            / (mf.clone() * mf.clone());
        var = var + hold_sq - hold.clone() * hold.clone();
        avg = avg + hold;
    }
    let avg = avg / kf.clone();
    let var = var / (kf.clone() * kf) + e2 - e.clone() * e.clone();
    let bias = avg - e;
    var + bias.clone() * bias
}

/// Exact CV mean-squared error by enumerating the linear-dependence pattern
/// of the `n` feature vectors. Each new vector either extends the current
/// span (probability `1 - q^{r-d}`) or equals one of its `q^r` elements
/// (probability `q^{-d}` each).
pub fn linear_mse_exact(n: usize, k: usize, d: usize, q: u64, budget: u128) -> Result<ExactValue> {
    let scheme = partition_folds(n, k)?;
    let field = PrimeField::new(q as u32)?;
    let mut leaves: u128 = 1;
    for t in 0..n {
        let r = t.min(d) as u32;
        leaves = leaves.saturating_mul(1 + (q as u128).saturating_pow(r));
    }
    if leaves > budget {
        return Err(Error::BudgetExceeded { needed: leaves, budget });
    }
    let width = n.min(d).max(1);
    let step = rational_pow(q, -(d as i64));
    let mut total = ExactValue::zero();
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    fn walk(
        rows: &mut Vec<Vec<u32>>,
        rank: usize,
        weight: ExactValue,
        ctx: &(usize, usize, u64, usize, PrimeField, FoldScheme, ExactValue),
        total: &mut ExactValue,
    ) {
        let (n, d, q, width, field, scheme, step) = ctx;
        if rows.len() == *n {
            *total += weight * conditional_mse::<ExactValue>(rows, *field, *d, scheme);
            return;
        }
        if rank < *d {
            let mut v = vec![0u32; *width];
            v[rank] = 1;
            rows.push(v);
            let p = ExactValue::one() - rational_pow(*q, rank as i64 - *d as i64);
            walk(rows, rank + 1, &weight * p, ctx, total);
            rows.pop();
        }
        let count = (*q as usize).pow(rank as u32);
        for mut idx in 0..count {
            let mut v = vec![0u32; *width];
            for slot in v.iter_mut().take(rank) {
                *slot = (idx % *q as usize) as u32;
                idx /= *q as usize;
            }
            rows.push(v);
            walk(rows, rank, &weight * step, ctx, total);
            rows.pop();
        }
    }
    let ctx = (n, d, q, width, field, scheme, step.clone());
    walk(&mut rows, 0, ExactValue::one(), &ctx, &mut total);
    Ok(total)
}

/// Monte Carlo CV mean-squared error: feature matrices are simulated, the
/// learner's randomness is integrated in closed form.
pub fn linear_mse_mc(n: usize, k: usize, d: usize, q: u64, trials: usize, seed: u64) -> Result<EstimateWithError> {
    let scheme = partition_folds(n, k)?;
    let field = PrimeField::new(q as u32)?;
    let values = mc_pass(trials, seed, |rng| {
        let rows: Vec<Vec<u32>> = (0..n).map(|_| field.random_vector(d, rng)).collect();
        Ok(conditional_mse::<f64>(&rows, field, d, &scheme))
    })?;
    let (mean, _) = mean_and_error(&values);
    Ok(finish(mean, &values, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{exact_risk_moments, DEFAULT_BUDGET};
    use crate::types::FiniteDistribution;

    #[test]
    fn expected_loss_examples() {
        let l = expected_loss_exact(1, 1, 2).unwrap();
        assert_eq!(l.l_bar, rational(1, 8));
        assert_eq!(l.s0, rational(1, 4));
        let l = expected_loss_exact(0, 3, 5).unwrap();
        assert_eq!(l.l_bar, rational(4, 5) * (ExactValue::one() - rational_pow(5, -3)));
    }

    #[test]
    fn fold_noise_example() {
        assert_eq!(fold_noise_exact(1, 1, 2, 1).unwrap().value, rational(3, 32));
    }

    #[test]
    fn bound_cases() {
        let (c, v) = linear_mse_bound(5, 1, 10, 3).unwrap();
        assert_eq!(c, LinearCase::Underdetermined);
        assert!((v - 3f64.powi(-5)).abs() < 1e-18);
        assert_eq!(linear_mse_bound(10, 4, 8, 7).unwrap(), (LinearCase::FoldStarved, 1.0));
        let (c, v) = linear_mse_bound(12, 2, 10, 7).unwrap();
        assert_eq!(c, LinearCase::Overdetermined);
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
        assert!(linear_mse_bound(3, 4, 2, 2).is_err());
    }

    #[test]
    fn rule_risk_matches_closed_form() {
        let dist = FiniteDistribution::uniform_linear(2, &[0]).unwrap();
        let rule = linear_rule(1, 2).unwrap();
        let (mean, _) = exact_risk_moments(&rule, &dist, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(mean, rational(1, 8));
        let dist = FiniteDistribution::uniform_linear(3, &[0, 0]).unwrap();
        let rule = linear_rule(2, 3).unwrap();
        for size in 0..=3 {
            let (mean, var) = exact_risk_moments(&rule, &dist, size, DEFAULT_BUDGET).unwrap();
            let closed = expected_loss_exact(size, 2, 3).unwrap();
            assert_eq!(mean, closed.l_bar);
            assert_eq!(var, closed.variance);
        }
    }

    #[test]
    fn conditional_mode_matches_coset_mode_risk() {
        let dist = FiniteDistribution::uniform_linear(3, &[1, 2]).unwrap();
        let coset = linear_rule(2, 3).unwrap().with_truth(vec![1, 2]);
        let cond = coset.clone().with_mode(LinearMode::Conditional);
        let a = exact_risk_moments(&coset, &dist, 2, DEFAULT_BUDGET).unwrap();
        let b = exact_risk_moments(&cond, &dist, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_mse_matches_engine() {
        use crate::engine::{exact_functional, Functional};
        let dist = FiniteDistribution::uniform_linear(2, &[0, 0]).unwrap();
        let rule = linear_rule(2, 2).unwrap();
        for (n, k) in [(2, 2), (4, 2), (4, 4), (3, 3)] {
            let engine = exact_functional(&rule, &dist, n, k, Functional::Mse, DEFAULT_BUDGET).unwrap();
            assert_eq!(linear_mse_exact(n, k, 2, 2, DEFAULT_BUDGET).unwrap(), engine, "n={n} k={k}");
        }
        let dist = FiniteDistribution::uniform_linear(3, &[0, 0]).unwrap();
        let rule = linear_rule(2, 3).unwrap();
        let engine = exact_functional(&rule, &dist, 4, 2, Functional::Mse, DEFAULT_BUDGET).unwrap();
        assert_eq!(linear_mse_exact(4, 2, 2, 3, DEFAULT_BUDGET).unwrap(), engine);
    }

    #[test]
    fn mc_matches_exact() {
        let exact = to_f64(&linear_mse_exact(4, 2, 3, 3, DEFAULT_BUDGET).unwrap());
        let est = linear_mse_mc(4, 2, 3, 3, 20_000, 11).unwrap();
        assert!(est.covers(exact, 4.0), "{exact} vs {est:?}");
        assert_eq!(est, linear_mse_mc(4, 2, 3, 3, 20_000, 11).unwrap());
    }
}
