//! Five-term decomposition of the CV mean-squared error, stability
//! estimates, and the inequalities that bound each term.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::combinatorics::rational;
use crate::engine::{
    draw_sample, evaluate_sample, exact_pass, finish, mc_pass, mc_term, mean_and_error, risk_var_term, Conditional,
    EstimateWithError, ExactMoments, Functional, SampleEval, TrialRow, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::rule::LearningRule;
use crate::types::{
    partition_folds, ExactValue, Feature, FiniteDistribution, Hypothesis, HypothesisMixture, LabeledPoint,
};

/// How expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact { budget: u128 },
    MonteCarlo { trials: usize, seed: u64 },
}

impl Mode {
    pub fn exact() -> Self {
        Mode::Exact { budget: DEFAULT_BUDGET }
    }
}

/// A reported quantity: exact, or a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Exact(ExactValue),
    Estimate(EstimateWithError),
}

impl Term {
    pub fn value(&self) -> f64 {
        match self {
            Term::Exact(v) => v.to_f64().unwrap_or(f64::NAN),
            Term::Estimate(e) => e.value,
        }
    }

    pub fn exact(&self) -> Option<&ExactValue> {
        match self {
            Term::Exact(v) => Some(v),
            Term::Estimate(_) => None,
        }
    }

    pub fn std_error(&self) -> f64 {
        match self {
            Term::Exact(_) => 0.0,
            Term::Estimate(e) => e.std_error,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Exact(v) => write!(f, "{v}"),
            Term::Estimate(e) => write!(f, "{} ± {}", e.value, e.std_error),
        }
    }
}

/// `mse = sls + ((k-1)/k) inter_fold_cov + per_fold_noise / n + corr_hold - corr_risk + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub mse: Term,
    pub sls: Term,
    pub inter_fold_cov: Term,
    pub per_fold_noise: Term,
    pub corr_hold: Term,
    pub corr_risk: Term,
    pub residual: Term,
    /// `E[Lbar_1 (1 - Lbar_1)]` with `Lbar_1` the mixture-averaged fold risk.
    pub risk_spread: Term,
}

/// Stability parameters at removal size `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProfile {
    pub n: usize,
    pub m: usize,
    pub sls_beta: Term,
    pub loss_stability: Term,
    /// `None` when some hypothesis only carries a closed-form risk.
    pub hypothesis_stability: Option<Term>,
    pub risk_var_n: Term,
    pub risk_var_train: Term,
    pub mean_risk_n: Term,
    pub mean_risk_train: Term,
    /// `E[(L_{n-m} - L_n)^2]`.
    pub risk_gap_sq: Term,
}

fn pair_terms(k: usize, cov: ExactValue, corr: ExactValue) -> (ExactValue, ExactValue) {
    if k < 2 {
        (ExactValue::zero(), ExactValue::zero())
    } else {
        (cov, corr)
    }
}

fn exact_report(mom: &ExactMoments) -> DecompositionReport {
    let s = mom.scheme;
    let (cov, corr_risk) = pair_terms(s.k, mom.fold_cov(), mom.corr_risk());
    let corr_hold = mom.corr_hold();
    let k = s.k as i64;
    let predicted =
        &mom.sls + rational(k - 1, k) * &cov + &mom.noise / rational(s.n as i64, 1) + &corr_hold - &corr_risk;
    DecompositionReport {
        n: s.n,
        k: s.k,
        m: s.m,
        residual: Term::Exact(&mom.mse - predicted),
        mse: Term::Exact(mom.mse.clone()),
        sls: Term::Exact(mom.sls.clone()),
        inter_fold_cov: Term::Exact(cov),
        per_fold_noise: Term::Exact(mom.noise.clone()),
        corr_hold: Term::Exact(corr_hold),
        corr_risk: Term::Exact(corr_risk),
        risk_spread: Term::Exact(mom.risk_spread.clone()),
    }
}

fn mc_report(rows: &[TrialRow], n: usize, k: usize, seed: u64) -> DecompositionReport {
    let t = rows.len();
    let term = |f: Functional| {
        if k < 2 && matches!(f, Functional::FoldCov | Functional::CorrRisk) {
            (0.0, vec![0.0; t])
        } else {
            mc_term(rows, k, f)
        }
    };
    let mse = term(Functional::Mse);
    let sls = term(Functional::Sls);
    let cov = term(Functional::FoldCov);
    let noise = term(Functional::PerFoldNoise);
    let hold = term(Functional::CorrHold);
    let risk = term(Functional::CorrRisk);
    let a = (k as f64 - 1.0) / k as f64;
    let b = 1.0 / n as f64;
    let combine = |x: f64, c: f64, s: f64, v: f64, h: f64, r: f64| x - (s + a * c + b * v + h - r);
    let residual_value = combine(mse.0, cov.0, sls.0, noise.0, hold.0, risk.0);
    let residual_infl: Vec<f64> =
        (0..t).map(|i| combine(mse.1[i], cov.1[i], sls.1[i], noise.1[i], hold.1[i], risk.1[i])).collect();
    let spread: Vec<f64> = rows.iter().map(|r| r.risk_spread).collect();
    let est = |p: &(f64, Vec<f64>)| Term::Estimate(finish(p.0, &p.1, seed));
    DecompositionReport {
        n,
        k,
        m: n / k,
        mse: est(&mse),
        sls: est(&sls),
        inter_fold_cov: est(&cov),
        per_fold_noise: est(&noise),
        corr_hold: est(&hold),
        corr_risk: est(&risk),
        residual: Term::Estimate(finish(residual_value, &residual_infl, seed)),
        risk_spread: est(&(mean_and_error(&spread).0, spread)),
    }
}

/// Decomposes the CV mean-squared error into its five terms in one pass.
pub fn decompose<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    n: usize,
    k: usize,
    mode: Mode,
) -> Result<DecompositionReport> {
    let scheme = partition_folds(n, k)?;
    match mode {
        Mode::Exact { budget } => {
            let mut mom = ExactMoments::new(scheme);
            exact_pass(rule, dist, &scheme, budget, |ev, w| {
                mom.add(&Conditional::from_eval(ev), w);
                Ok(())
            })?;
            Ok(exact_report(&mom))
        }
        Mode::MonteCarlo { trials, seed } => {
            let rows = crate::engine::mc_rows(rule, dist, &scheme, trials, seed)?;
            Ok(mc_report(&rows, n, k, seed))
        }
    }
}

/// Feature marginal of a distribution.
fn feature_masses(dist: &FiniteDistribution) -> BTreeMap<Feature, ExactValue> {
    let mut out: BTreeMap<Feature, ExactValue> = BTreeMap::new();
    for (z, mass) in dist.support() {
        *out.entry(z.x.clone()).or_insert_with(ExactValue::zero) += mass;
    }
    out
}

fn disagreement(a: &Hypothesis, b: &Hypothesis, marginal: &BTreeMap<Feature, ExactValue>) -> Option<ExactValue> {
    let mut total = ExactValue::zero();
    for (x, mass) in marginal {
        if a.predict(x).ok()? != b.predict(x).ok()? {
            total += mass;
        }
    }
    Some(total)
}

/// Joint quantities of the models trained on `n` and on `n - m` points with
/// independent internal randomness.
struct PairStats {
    abs_gap: ExactValue,
    sq_gap: ExactValue,
    disagree: Option<ExactValue>,
}

fn pair_stats(
    full: &HypothesisMixture,
    sub: &HypothesisMixture,
    dist: &FiniteDistribution,
    marginal: &BTreeMap<Feature, ExactValue>,
) -> Result<PairStats> {
    let mut abs_gap = ExactValue::zero();
    let mut sq_gap = ExactValue::zero();
    let mut disagree = Some(ExactValue::zero());
    let full_risks: Vec<ExactValue> = full.atoms().iter().map(|(h, _)| h.risk(dist)).collect::<Result<_>>()?;
    for (hs, ws) in sub.atoms() {
        let ls = hs.risk(dist)?;
        for ((hf, wf), lf) in full.atoms().iter().zip(&full_risks) {
            let w = ws * wf;
            let d = lf - &ls;
            sq_gap += &d * &d * &w;
            abs_gap += d.abs() * &w;
            disagree = match (disagree, disagreement(hf, hs, marginal)) {
                (Some(acc), Some(p)) => Some(acc + p * &w),
                _ => None,
            };
        }
    }
    Ok(PairStats { abs_gap, sq_gap, disagree })
}

/// Stability parameters of `(rule, dist)` at sample size `n` and removal size `m`.
pub fn stability_estimates<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    n: usize,
    m: usize,
    mode: Mode,
) -> Result<StabilityProfile> {
    if m == 0 || m >= n || !n.is_multiple_of(m) {
        return Err(Error::InvalidFoldSize { n, m });
    }
    let scheme = partition_folds(n, n / m)?;
    let marginal = feature_masses(dist);
    match mode {
        Mode::Exact { budget } => {
            let z = ExactValue::zero;
            let mut sls = z();
            let (mut full_mean, mut full_sq, mut sub_mean, mut sub_sq) = (z(), z(), z(), z());
            let (mut abs_gap, mut sq_gap) = (z(), z());
            let mut disagree = Some(z());
            exact_pass(rule, dist, &scheme, budget, |ev, w| {
                let c = Conditional::from_eval(ev);
                sls += &c.sls * w;
                full_mean += &ev.full.mean * w;
                full_sq += &ev.full.second * w;
                let last = &ev.folds[scheme.k - 1].risk;
                sub_mean += &last.mean * w;
                sub_sq += &last.second * w;
                let p = pair_stats(&ev.full_model, &ev.last_fold_model, dist, &marginal)?;
                abs_gap += p.abs_gap * w;
                sq_gap += p.sq_gap * w;
                disagree = match (disagree.take(), p.disagree) {
                    (Some(acc), Some(d)) => Some(acc + d * w),
                    _ => None,
                };
                Ok(())
            })?;
            let var_n = &full_sq - &full_mean * &full_mean;
            let var_t = &sub_sq - &sub_mean * &sub_mean;
            Ok(StabilityProfile {
                n,
                m,
                sls_beta: Term::Exact(sls),
                loss_stability: Term::Exact(abs_gap),
                hypothesis_stability: disagree.map(Term::Exact),
                risk_var_n: Term::Exact(var_n),
                risk_var_train: Term::Exact(var_t),
                mean_risk_n: Term::Exact(full_mean),
                mean_risk_train: Term::Exact(sub_mean),
                risk_gap_sq: Term::Exact(sq_gap),
            })
        }
        Mode::MonteCarlo { trials, seed } => {
            struct Row {
                sls: f64,
                full: (f64, f64),
                sub: (f64, f64),
                abs_gap: f64,
                sq_gap: f64,
                disagree: Option<f64>,
            }
            let f = |x: &ExactValue| x.to_f64().unwrap_or(f64::NAN);
            let rows = mc_pass(trials, seed, |rng| {
                let pts: Vec<LabeledPoint> = draw_sample(dist, n, rng);
                let ev: SampleEval = evaluate_sample(rule, &pts, &scheme, dist)?;
                let c = Conditional::from_eval(&ev);
                let last = &ev.folds[scheme.k - 1].risk;
                let p = pair_stats(&ev.full_model, &ev.last_fold_model, dist, &marginal)?;
                Ok(Row {
                    sls: f(&c.sls),
                    full: (f(&ev.full.mean), f(&ev.full.second)),
                    sub: (f(&last.mean), f(&last.second)),
                    abs_gap: f(&p.abs_gap),
                    sq_gap: f(&p.sq_gap),
                    disagree: p.disagree.as_ref().map(f),
                })
            })?;
            let mean_term = |xs: Vec<f64>| Term::Estimate(finish(mean_and_error(&xs).0, &xs, seed));
            let var_term = |xs: Vec<(f64, f64)>| {
                let (v, infl) = risk_var_term(&xs);
                Term::Estimate(finish(v, &infl, seed))
            };
            let disagree: Option<Vec<f64>> = rows.iter().map(|r| r.disagree).collect();
            Ok(StabilityProfile {
                n,
                m,
                sls_beta: mean_term(rows.iter().map(|r| r.sls).collect()),
                loss_stability: mean_term(rows.iter().map(|r| r.abs_gap).collect()),
                hypothesis_stability: disagree.map(mean_term),
                risk_var_n: var_term(rows.iter().map(|r| r.full).collect()),
                risk_var_train: var_term(rows.iter().map(|r| r.sub).collect()),
                mean_risk_n: mean_term(rows.iter().map(|r| r.full.0).collect()),
                mean_risk_train: mean_term(rows.iter().map(|r| r.sub.0).collect()),
                risk_gap_sq: mean_term(rows.iter().map(|r| r.sq_gap).collect()),
            })
        }
    }
}

/// One inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub slack: f64,
}

/// `rhs - lhs = a + c * sqrt(p)` with `c, p >= 0`.
struct Gap<T> {
    a: T,
    c: T,
    p: T,
}

fn decide_exact(g: &Gap<ExactValue>) -> bool {
    !g.a.is_negative() || &g.c * &g.c * &g.p >= &g.a * &g.a
}

fn make_check(name: &str, lhs: f64, rhs: f64, holds: bool) -> BoundCheck {
    let mut slack = rhs - lhs;
    if holds && slack < 0.0 {
        slack = 0.0;
    } else if !holds && slack >= 0.0 {
        slack = -f64::MIN_POSITIVE;
    }
    BoundCheck { name: name.to_string(), lhs, rhs, holds, slack }
}

/// Values the checks need, in one arithmetic.
struct Inputs<T> {
    n: T,
    k: T,
    m: T,
    mse: T,
    sls: T,
    cov: T,
    noise: T,
    corr_hold: T,
    corr_risk: T,
    spread: T,
    var_n: T,
    var_t: T,
    mean_n: T,
    mean_t: T,
}

trait Arith: Clone {
    fn from_i(v: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn abs_val(&self) -> Self;
    fn to_float(&self) -> f64;
}

impl Arith for ExactValue {
    fn from_i(v: i64) -> Self {
        rational(v, 1)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_float(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Arith for f64 {
    fn from_i(v: i64) -> Self {
        v as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_float(&self) -> f64 {
        *self
    }
}

fn run_checks<T: Arith>(x: &Inputs<T>, decide: impl Fn(&Gap<T>) -> bool) -> Vec<BoundCheck> {
    let one = T::from_i(1);
    let two = T::from_i(2);
    let four = T::from_i(4);
    let zero = T::from_i(0);
    let sqrt = |v: &T| v.to_float().max(0.0).sqrt();
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: f64, rhs: f64, gap: Gap<T>| {
        let holds = decide(&gap);
        out.push(make_check(name, lhs, rhs, holds));
    };
    let n_minus_m = x.n.sub(&x.m);
    let k_factor = x.k.sub(&one).div(&x.k);
    // sigma_n^2 * sigma_bar^2 / m
    let p_corr = x.var_n.mul(&x.noise).div(&x.m);

    let c = x.corr_hold.sub(&x.corr_risk).abs_val();
    let base = k_factor.mul(&x.var_t);
    push(
        "correction term",
        c.to_float(),
        base.to_float() + 2.0 * sqrt(&p_corr),
        Gap { a: base.sub(&c), c: two.clone(), p: p_corr.clone() },
    );

    if x.k.to_float() >= 2.0 {
        let lower = zero.sub(&one.div(&four.mul(&n_minus_m)));
        push(
            "fold covariance lower",
            lower.to_float(),
            x.cov.to_float(),
            Gap { a: x.cov.sub(&lower), c: zero.clone(), p: zero.clone() },
        );
        let upper = x.var_t.add(&one.div(&four.mul(&x.m)));
        push(
            "fold covariance upper",
            x.cov.to_float(),
            upper.to_float(),
            Gap { a: upper.sub(&x.cov), c: zero.clone(), p: zero.clone() },
        );
    }

    push(
        "noise below risk spread",
        x.noise.to_float(),
        x.spread.to_float(),
        Gap { a: x.spread.sub(&x.noise), c: zero.clone(), p: zero.clone() },
    );
    let quarter = one.div(&four);
    push(
        "risk spread below 1/4",
        x.spread.to_float(),
        quarter.to_float(),
        Gap { a: quarter.sub(&x.spread), c: zero.clone(), p: zero.clone() },
    );

    let bias = x.mean_t.sub(&x.mean_n);
    let bias_sq = bias.mul(&bias);
    push(
        "sls lower",
        bias_sq.to_float(),
        x.sls.to_float(),
        Gap { a: x.sls.sub(&bias_sq), c: zero.clone(), p: zero.clone() },
    );
    let p_sd = x.var_t.mul(&x.var_n);
    let upper_base = x.var_t.add(&x.var_n).add(&bias_sq);
    push(
        "sls upper",
        x.sls.to_float(),
        upper_base.to_float() + 2.0 * sqrt(&p_sd),
        Gap { a: upper_base.sub(&x.sls), c: two.clone(), p: p_sd },
    );

    let half_n = one.div(&two.mul(&x.n));
    let lower_base = x.sls.sub(&half_n).sub(&x.var_t);
    push(
        "mse lower",
        lower_base.to_float() - 2.0 * sqrt(&p_corr),
        x.mse.to_float(),
        Gap { a: x.mse.sub(&lower_base), c: two, p: p_corr },
    );
    out
}

/// Evaluates the inequality suite, in order: the correction-term bound, the
/// two-sided fold-covariance bound, the per-fold noise chain, the two-sided
/// SLS bound and the MSE lower bound.
pub fn bound_suite(report: &DecompositionReport, prof: &StabilityProfile) -> Result<Vec<BoundCheck>> {
    if report.n != prof.n || report.m != prof.m {
        return Err(Error::InputMismatch(format!(
            "report has (n, m) = ({}, {}), profile has ({}, {})",
            report.n, report.m, prof.n, prof.m
        )));
    }
    let terms = [
        &report.mse,
        &report.sls,
        &report.inter_fold_cov,
        &report.per_fold_noise,
        &report.corr_hold,
        &report.corr_risk,
        &report.risk_spread,
        &prof.risk_var_n,
        &prof.risk_var_train,
        &prof.mean_risk_n,
        &prof.mean_risk_train,
    ];
    let exact = terms.iter().all(|t| t.exact().is_some());
    let mc = terms.iter().all(|t| t.exact().is_none());
    if !exact && !mc {
        return Err(Error::InputMismatch("mixed exact and Monte Carlo terms".into()));
    }
    let (n, k, m) = (report.n as i64, report.k as i64, report.m as i64);
    if exact {
        let g = |t: &Term| t.exact().cloned().unwrap_or_default();
        let x = Inputs {
            n: rational(n, 1),
            k: rational(k, 1),
            m: rational(m, 1),
            mse: g(&report.mse),
            sls: g(&report.sls),
            cov: g(&report.inter_fold_cov),
            noise: g(&report.per_fold_noise),
            corr_hold: g(&report.corr_hold),
            corr_risk: g(&report.corr_risk),
            spread: g(&report.risk_spread),
            var_n: g(&prof.risk_var_n),
            var_t: g(&prof.risk_var_train),
            mean_n: g(&prof.mean_risk_n),
            mean_t: g(&prof.mean_risk_train),
        };
        Ok(run_checks(&x, decide_exact))
    } else {
        let g = |t: &Term| t.value();
        let x = Inputs {
            n: n as f64,
            k: k as f64,
            m: m as f64,
            mse: g(&report.mse),
            sls: g(&report.sls),
            cov: g(&report.inter_fold_cov),
            noise: g(&report.per_fold_noise),
            corr_hold: g(&report.corr_hold),
            corr_risk: g(&report.corr_risk),
            spread: g(&report.risk_spread),
            var_n: g(&prof.risk_var_n).max(0.0),
            var_t: g(&prof.risk_var_train).max(0.0),
            mean_n: g(&prof.mean_risk_n),
            mean_t: g(&prof.mean_risk_train),
        };
        Ok(run_checks(&x, |gap: &Gap<f64>| gap.a >= 0.0 || gap.c * gap.c * gap.p >= gap.a * gap.a))
    }
}

/// Rule whose full-sample output is the interval `(1/2 - p/2, 1 - p/2)` on
/// `[0, 1]`, with `p` the fraction of positive labels, and the constant-zero
/// hypothesis on any smaller training set.
#[derive(Debug, Clone, Copy)]
pub struct AnticorrRule {
    pub n: usize,
}

impl LearningRule for AnticorrRule {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        if sample.len() < self.n {
            return Ok(HypothesisMixture::single(Hypothesis::constant(0)));
        }
        let ones = sample.iter().filter(|z| z.y == 1).count() as i64;
        // the interval misses (1/2 - p/2, 1/2] and [1 - p/2, 1]: total length p
        let p = rational(ones, sample.len() as i64);
        Ok(HypothesisMixture::single(Hypothesis::opaque(p)))
    }

    fn name(&self) -> String {
        format!("anticorr-{}", self.n)
    }
}

/// Uniform inputs on `[0, 1]` labeled by `x > 1/2`, collapsed to the two
/// half-intervals: token 0 carries label 0, token 1 carries label 1.
pub fn anticorr_fixture(n: usize) -> Result<(AnticorrRule, FiniteDistribution)> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("fixture needs an even n >= 2, got {n}")));
    }
    let half = rational(1, 2);
    let dist =
        FiniteDistribution::new(vec![(LabeledPoint::token(0, 0), half.clone()), (LabeledPoint::token(1, 1), half)], 2)?;
    Ok((AnticorrRule { n }, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::ConstantRule;

    fn ex(t: &Term) -> ExactValue {
        t.exact().unwrap().clone()
    }

    #[test]
    fn anticorr_has_zero_mse() {
        let (rule, dist) = anticorr_fixture(2).unwrap();
        let r = decompose(&rule, &dist, 2, 2, Mode::exact()).unwrap();
        assert!(ex(&r.mse).is_zero());
        assert_eq!(ex(&r.sls), rational(1, 8));
        assert!(ex(&r.residual).is_zero());
        let p = stability_estimates(&rule, &dist, 2, 1, Mode::exact()).unwrap();
        assert_eq!(ex(&p.sls_beta), rational(1, 8));
        assert!(p.hypothesis_stability.is_none());

        let (rule, dist) = anticorr_fixture(4).unwrap();
        let r = decompose(&rule, &dist, 4, 4, Mode::exact()).unwrap();
        assert!(ex(&r.mse).is_zero());
        assert_eq!(ex(&r.sls), rational(1, 16));
        assert!(anticorr_fixture(3).is_err());
    }

    #[test]
    fn constant_rule_terms() {
        let dist = FiniteDistribution::bernoulli(rational(1, 2)).unwrap();
        let r = decompose(&ConstantRule { label: 0 }, &dist, 4, 2, Mode::exact()).unwrap();
        assert!(ex(&r.sls).is_zero());
        assert!(ex(&r.inter_fold_cov).is_zero());
        assert_eq!(ex(&r.mse), rational(1, 16));
        let p = stability_estimates(&ConstantRule { label: 0 }, &dist, 4, 1, Mode::exact()).unwrap();
        assert!(ex(&p.sls_beta).is_zero());
        assert!(ex(&p.loss_stability).is_zero());
        assert!(ex(p.hypothesis_stability.as_ref().unwrap()).is_zero());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let dist = FiniteDistribution::bernoulli(rational(1, 2)).unwrap();
        let rule = ConstantRule { label: 0 };
        let r = decompose(&rule, &dist, 4, 2, Mode::exact()).unwrap();
        let p = stability_estimates(&rule, &dist, 4, 1, Mode::exact()).unwrap();
        assert!(matches!(bound_suite(&r, &p), Err(Error::InputMismatch(_))));
        let mc = stability_estimates(&rule, &dist, 4, 2, Mode::MonteCarlo { trials: 10, seed: 1 }).unwrap();
        assert!(matches!(bound_suite(&r, &mc), Err(Error::InputMismatch(_))));
    }

    #[test]
    fn residual_vanishes_for_randomized_and_ordered_rules() {
        use crate::rule::RandomTableRule;
        let third = rational(1, 3);
        let dist = FiniteDistribution::new(
            vec![
                (LabeledPoint::token(0, 0), third.clone()),
                (LabeledPoint::token(1, 1), third.clone()),
                (LabeledPoint::token(1, 0), third),
            ],
            2,
        )
        .unwrap();
        for ordered in [false, true] {
            let rule = RandomTableRule::new(5, vec![0, 1], 2).randomized(true).ordered(ordered);
            for k in [1, 2, 4] {
                let r = decompose(&rule, &dist, 4, k, Mode::exact()).unwrap();
                assert!(ex(&r.residual).is_zero(), "k={k} ordered={ordered}: {}", r.residual);
            }
        }
    }

    #[test]
    fn exact_sqrt_decision() {
        // 0 <= -2 + 2 sqrt(1): equality
        assert!(decide_exact(&Gap { a: rational(-2, 1), c: rational(2, 1), p: rational(1, 1) }));
        assert!(!decide_exact(&Gap { a: rational(-2, 1), c: rational(2, 1), p: rational(99, 100) }));
        assert!(decide_exact(&Gap { a: rational(0, 1), c: rational(0, 1), p: rational(0, 1) }));
    }
}
