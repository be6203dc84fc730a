//! Evaluation engines: exhaustive expectation over `D^n` in exact rationals,
//! and seeded Monte Carlo with per-trial streams.
//!
//! Both engines condition on the sample and integrate the rule's internal
//! randomness through its mixture, with independent draws for every
//! training run.

use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::rational;
use crate::error::{Error, Result};
use crate::rule::LearningRule;
use crate::types::{
    partition_folds, ExactValue, FiniteDistribution, FoldScheme, HypothesisMixture, LabeledPoint, SampleTuple,
};

/// Default cap on the number of weighted terms an exhaustive pass may visit.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

/// Expectations the engines know how to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    /// `E[(L_cv - L)^2]`.
    Mse,
    /// `E[(L~ - L)^2]` with `L~` the average risk of the fold models.
    Sls,
    /// `Cov(Lhat_i, Lhat_j)` averaged over ordered fold pairs.
    FoldCov,
    /// Expected conditional variance of a single hold-out loss.
    PerFoldNoise,
    /// `2 Cov(L, L_i - Lhat_i)` averaged over folds.
    CorrHold,
    /// `((k-1)/k) Cov(L_i, L_j)` averaged over ordered fold pairs.
    CorrRisk,
    /// Variance of the risk of the model trained on the given number of points.
    LossVar(usize),
    /// Expected risk of the model trained on all `n` points.
    Mean,
}

/// Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
    pub master_seed: u64,
}

impl EstimateWithError {
    /// `|value - target| <= z * std_error`.
    pub fn covers(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.std_error
    }
}

/// Conditional moments, given the sample, of the model trained on one
/// training set.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMoments {
    /// `E[L(h)]`.
    pub mean: ExactValue,
    /// `E[L(h)^2]`.
    pub second: ExactValue,
    /// `E[L(h)(1 - L(h))]`.
    pub spread: ExactValue,
}

/// Conditional moments for fold `i`: hold-out loss and risk of the model
/// trained on the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMoments {
    pub hold: ExactValue,
    pub hold_sq: ExactValue,
    pub risk: RiskMoments,
}

/// Everything a single sample contributes to the engine functionals.
#[derive(Debug, Clone)]
pub struct SampleEval {
    pub folds: Vec<FoldMoments>,
    pub full: RiskMoments,
    /// Output law on the first `n - m` points (the complement of the last fold).
    pub last_fold_model: HypothesisMixture,
    /// Output law on all `n` points.
    pub full_model: HypothesisMixture,
}

pub fn population_risk(mix: &HypothesisMixture, dist: &FiniteDistribution) -> Result<ExactValue> {
    let mut total = ExactValue::zero();
    for (h, w) in mix.atoms() {
        total += h.risk(dist)? * w;
    }
    Ok(total)
}

pub(crate) fn risk_moments(mix: &HypothesisMixture, dist: &FiniteDistribution) -> Result<RiskMoments> {
    let mut mean = ExactValue::zero();
    let mut second = ExactValue::zero();
    let mut spread = ExactValue::zero();
    for (h, w) in mix.atoms() {
        let l = h.risk(dist)?;
        let l2 = &l * &l;
        spread += (&l - &l2) * w;
        second += l2 * w;
        mean += l * w;
    }
    Ok(RiskMoments { mean, second, spread })
}

fn hold_moments(mix: &HypothesisMixture, holdout: &[LabeledPoint]) -> Result<(ExactValue, ExactValue)> {
    let m = holdout.len() as i64;
    let mut hold = ExactValue::zero();
    let mut hold_sq = ExactValue::zero();
    for (h, w) in mix.atoms() {
        let mut misses = 0i64;
        for z in holdout {
            if h.loss(z)? {
                misses += 1;
            }
        }
        let lhat = rational(misses, m);
        hold_sq += &lhat * &lhat * w;
        hold += lhat * w;
    }
    Ok((hold, hold_sq))
}

fn check_length(sample: &SampleTuple, scheme: &FoldScheme) -> Result<()> {
    if sample.len() != scheme.n {
        return Err(Error::LengthMismatch { expected: scheme.n, got: sample.len() });
    }
    Ok(())
}

/// CV estimate `(1/k) sum_i Lhat_i` on one sample, with each fold's hold-out
/// loss averaged over the mixture trained on its complement.
pub fn cv_estimate<R: LearningRule + ?Sized>(
    rule: &R,
    sample: &SampleTuple,
    scheme: &FoldScheme,
) -> Result<ExactValue> {
    check_length(sample, scheme)?;
    let pts = sample.points();
    let mut total = ExactValue::zero();
    for i in 0..scheme.k {
        let mix = rule.train(&scheme.complement(pts, i))?;
        total += hold_moments(&mix, &pts[scheme.block(i)])?.0;
    }
    Ok(total / rational(scheme.k as i64, 1))
}

/// Trains every fold model and the full model on one sample.
pub fn evaluate_sample<R: LearningRule + ?Sized>(
    rule: &R,
    points: &[LabeledPoint],
    scheme: &FoldScheme,
    dist: &FiniteDistribution,
) -> Result<SampleEval> {
    if points.len() != scheme.n {
        return Err(Error::LengthMismatch { expected: scheme.n, got: points.len() });
    }
    let mut folds = Vec::with_capacity(scheme.k);
    let mut last = None;
    for i in 0..scheme.k {
        let mix = rule.train(&scheme.complement(points, i))?;
        let (hold, hold_sq) = hold_moments(&mix, &points[scheme.block(i)])?;
        folds.push(FoldMoments { hold, hold_sq, risk: risk_moments(&mix, dist)? });
        if i + 1 == scheme.k {
            last = Some(mix);
        }
    }
    let full_model = rule.train(points)?;
    let full = risk_moments(&full_model, dist)?;
    Ok(SampleEval { folds, full, last_fold_model: last.expect("at least one fold"), full_model })
}

/// Per-sample conditional values of the plain-expectation functionals.
#[derive(Debug, Clone)]
pub(crate) struct Conditional {
    pub mse: ExactValue,
    pub sls: ExactValue,
    pub noise: ExactValue,
    pub risk_spread: ExactValue,
    pub hold: Vec<ExactValue>,
    pub risk: Vec<ExactValue>,
    pub full: ExactValue,
    pub full_sq: ExactValue,
    /// `avg_i (E[L_i] - E[Lhat_i])` given the sample.
    pub gap: ExactValue,
}

fn conditional_mse(means: impl Iterator<Item = (ExactValue, ExactValue)>, k: usize, full: &RiskMoments) -> ExactValue {
    let kq = rational(k as i64, 1);
    let mut avg = ExactValue::zero();
    let mut var = ExactValue::zero();
    for (first, second) in means {
        var += &second - &first * &first;
        avg += first;
    }
    let avg = avg / &kq;
    let var = var / (&kq * &kq) + &full.second - &full.mean * &full.mean;
    let bias = avg - &full.mean;
    var + &bias * &bias
}

impl Conditional {
    pub fn from_eval(ev: &SampleEval) -> Self {
        let k = ev.folds.len();
        let kq = rational(k as i64, 1);
        let mse = conditional_mse(ev.folds.iter().map(|f| (f.hold.clone(), f.hold_sq.clone())), k, &ev.full);
        let sls = conditional_mse(ev.folds.iter().map(|f| (f.risk.mean.clone(), f.risk.second.clone())), k, &ev.full);
        let mut noise = ExactValue::zero();
        let mut risk_spread = ExactValue::zero();
        let mut gap = ExactValue::zero();
        for f in &ev.folds {
            noise += &f.risk.spread;
            risk_spread += &f.risk.mean * (ExactValue::one() - &f.risk.mean);
            gap += &f.risk.mean - &f.hold;
        }
        Conditional {
            mse,
            sls,
            noise: noise / &kq,
            risk_spread: risk_spread / &kq,
            hold: ev.folds.iter().map(|f| f.hold.clone()).collect(),
            risk: ev.folds.iter().map(|f| f.risk.mean.clone()).collect(),
            full: ev.full.mean.clone(),
            full_sq: ev.full.second.clone(),
            gap: gap / &kq,
        }
    }
}

/// Average of `v_i v_j` over ordered pairs `i != j`.
pub(crate) fn pair_average(v: &[ExactValue]) -> ExactValue {
    let k = v.len();
    if k < 2 {
        return ExactValue::zero();
    }
    let s: ExactValue = v.iter().sum();
    let sq: ExactValue = v.iter().map(|x| x * x).sum();
    (&s * &s - sq) / rational((k * (k - 1)) as i64, 1)
}

fn pair_average_f64(v: &[f64]) -> f64 {
    let k = v.len();
    if k < 2 {
        return 0.0;
    }
    let s: f64 = v.iter().sum();
    let sq: f64 = v.iter().map(|x| x * x).sum();
    (s * s - sq) / (k * (k - 1)) as f64
}

/// Exact expectations of everything in [`Conditional`], accumulated over `D^n`.
#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub scheme: FoldScheme,
    pub mse: ExactValue,
    pub sls: ExactValue,
    pub noise: ExactValue,
    pub risk_spread: ExactValue,
    pub hold_mean: Vec<ExactValue>,
    pub risk_mean: Vec<ExactValue>,
    pub hold_pair: ExactValue,
    pub risk_pair: ExactValue,
    pub full_mean: ExactValue,
    pub full_sq: ExactValue,
    pub full_gap: ExactValue,
    pub gap_mean: ExactValue,
}

impl ExactMoments {
    pub(crate) fn new(scheme: FoldScheme) -> Self {
        let z = ExactValue::zero;
        ExactMoments {
            scheme,
            mse: z(),
            sls: z(),
            noise: z(),
            risk_spread: z(),
            hold_mean: vec![z(); scheme.k],
            risk_mean: vec![z(); scheme.k],
            hold_pair: z(),
            risk_pair: z(),
            full_mean: z(),
            full_sq: z(),
            full_gap: z(),
            gap_mean: z(),
        }
    }

    pub(crate) fn add(&mut self, c: &Conditional, w: &ExactValue) {
        self.mse += &c.mse * w;
        self.sls += &c.sls * w;
        self.noise += &c.noise * w;
        self.risk_spread += &c.risk_spread * w;
        for (acc, v) in self.hold_mean.iter_mut().zip(&c.hold) {
            *acc += v * w;
        }
        for (acc, v) in self.risk_mean.iter_mut().zip(&c.risk) {
            *acc += v * w;
        }
        self.hold_pair += pair_average(&c.hold) * w;
        self.risk_pair += pair_average(&c.risk) * w;
        self.full_mean += &c.full * w;
        self.full_sq += &c.full_sq * w;
        self.full_gap += &c.full * &c.gap * w;
        self.gap_mean += &c.gap * w;
    }

    pub fn fold_cov(&self) -> ExactValue {
        &self.hold_pair - pair_average(&self.hold_mean)
    }

    pub fn corr_risk(&self) -> ExactValue {
        let k = self.scheme.k as i64;
        rational(k - 1, k) * (&self.risk_pair - pair_average(&self.risk_mean))
    }

    pub fn corr_hold(&self) -> ExactValue {
        rational(2, 1) * (&self.full_gap - &self.full_mean * &self.gap_mean)
    }

    pub fn full_var(&self) -> ExactValue {
        &self.full_sq - &self.full_mean * &self.full_mean
    }
}

/// Calls `visit` on every ordered tuple of support points of length `len`,
/// with its product weight.
pub fn for_each_tuple<F>(dist: &FiniteDistribution, len: usize, budget: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&[LabeledPoint], &ExactValue) -> Result<()>,
{
    let s = dist.len() as u128;
    let needed = s.checked_pow(len as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let support = dist.support();
    let mut idx = vec![0usize; len];
    let mut points: Vec<LabeledPoint> = vec![support[0].0.clone(); len];
    // prefix[i] = product of the first i masses
    let mut prefix = vec![ExactValue::one(); len + 1];
    let mut from = 0;
    loop {
        for i in from..len {
            points[i] = support[idx[i]].0.clone();
            prefix[i + 1] = &prefix[i] * &support[idx[i]].1;
        }
        visit(&points, &prefix[len])?;
        let mut p = len;
        loop {
            if p == 0 {
                return Ok(());
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < support.len() {
                break;
            }
            idx[p] = 0;
        }
        from = p;
    }
}

/// Exhaustive pass over `D^n`: visits the evaluation of every sample.
pub fn exact_pass<R, F>(
    rule: &R,
    dist: &FiniteDistribution,
    scheme: &FoldScheme,
    budget: u128,
    mut visit: F,
) -> Result<()>
where
    R: LearningRule + ?Sized,
    F: FnMut(&SampleEval, &ExactValue) -> Result<()>,
{
    let tuples = (dist.len() as u128).checked_pow(scheme.n as u32).unwrap_or(u128::MAX);
    let mut widest = 1u128;
    for_each_tuple(dist, scheme.n, budget, |pts, w| {
        let ev = evaluate_sample(rule, pts, scheme, dist)?;
        let atoms = ev.full_model.len().max(ev.last_fold_model.len()) as u128;
        if atoms > widest {
            widest = atoms;
            let needed = tuples.saturating_mul(widest);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
        }
        visit(&ev, w)
    })
}

pub fn exact_moments<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    scheme: &FoldScheme,
    budget: u128,
) -> Result<ExactMoments> {
    let mut acc = ExactMoments::new(*scheme);
    exact_pass(rule, dist, scheme, budget, |ev, w| {
        acc.add(&Conditional::from_eval(ev), w);
        Ok(())
    })?;
    Ok(acc)
}

/// Exact `(E[L], Var(L))` for the model trained on `size` i.i.d. points.
pub fn exact_risk_moments<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    size: usize,
    budget: u128,
) -> Result<(ExactValue, ExactValue)> {
    let mut mean = ExactValue::zero();
    let mut second = ExactValue::zero();
    for_each_tuple(dist, size, budget, |pts, w| {
        let r = risk_moments(&rule.train(pts)?, dist)?;
        mean += r.mean * w;
        second += r.second * w;
        Ok(())
    })?;
    let var = &second - &mean * &mean;
    Ok((mean, var))
}

fn needs_pairs(functional: Functional, k: usize) -> Result<()> {
    if matches!(functional, Functional::FoldCov | Functional::CorrRisk) && k < 2 {
        return Err(Error::TooFewFolds { k });
    }
    Ok(())
}

/// Exact expectation of `functional` over `D^n` and all internal randomness.
pub fn exact_functional<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    n: usize,
    k: usize,
    functional: Functional,
    budget: u128,
) -> Result<ExactValue> {
    let scheme = partition_folds(n, k)?;
    needs_pairs(functional, k)?;
    if let Functional::LossVar(size) = functional {
        return Ok(exact_risk_moments(rule, dist, size, budget)?.1);
    }
    let mom = exact_moments(rule, dist, &scheme, budget)?;
    Ok(match functional {
        Functional::Mse => mom.mse,
        Functional::Sls => mom.sls,
        Functional::FoldCov => mom.fold_cov(),
        Functional::PerFoldNoise => mom.noise,
        Functional::CorrHold => mom.corr_hold(),
        Functional::CorrRisk => mom.corr_risk(),
        Functional::Mean => mom.full_mean,
        Functional::LossVar(_) => unreachable!(),
    })
}

/// Floating-point copy of [`Conditional`] for one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialRow {
    pub mse: f64,
    pub sls: f64,
    pub noise: f64,
    pub risk_spread: f64,
    pub hold: Vec<f64>,
    pub risk: Vec<f64>,
    pub full: f64,
    pub full_sq: f64,
    pub gap: f64,
}

fn f(x: &ExactValue) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl From<&Conditional> for TrialRow {
    fn from(c: &Conditional) -> Self {
        TrialRow {
            mse: f(&c.mse),
            sls: f(&c.sls),
            noise: f(&c.noise),
            risk_spread: f(&c.risk_spread),
            hold: c.hold.iter().map(f).collect(),
            risk: c.risk.iter().map(f).collect(),
            full: f(&c.full),
            full_sq: f(&c.full_sq),
            gap: f(&c.gap),
        }
    }
}

/// Generator for trial `t` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent trials in parallel; the output order and
/// content depend only on `(seed, trials)`.
pub fn mc_pass<T, F>(trials: usize, seed: u64, run: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    if trials < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trials, got {trials}")));
    }
    (0..trials as u64).into_par_iter().map(|t| run(&mut trial_rng(seed, t))).collect()
}

pub fn draw_sample<R: rand::Rng + ?Sized>(dist: &FiniteDistribution, n: usize, rng: &mut R) -> Vec<LabeledPoint> {
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Mean and standard error, with sums taken around the first value so that
/// constant input gives an exactly zero error.
pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let shift = xs[0];
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in xs {
        let d = x - shift;
        s1 += d;
        s2 += d * d;
    }
    let mean = shift + s1 / t;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = ((s2 - s1 * s1 / t) / (t - 1.0)).max(0.0);
    (mean, (var / t).sqrt())
}

/// Unbiased sample covariance and its influence values.
pub fn sample_cov(x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let t = x.len() as f64;
    let (mx, _) = mean_and_error(x);
    let (my, _) = mean_and_error(y);
    let infl: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let (m, _) = mean_and_error(&infl);
    (m * t / (t - 1.0), infl)
}

/// Average over ordered fold pairs of the unbiased sample covariance between
/// per-fold columns, with its influence values.
fn pair_cov(rows: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let t = rows.len();
    let k = rows[0].len();
    let means: Vec<f64> = (0..k).map(|i| mean_and_error(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()).0).collect();
    let infl: Vec<f64> = rows
        .iter()
        .map(|r| {
            let centered: Vec<f64> = r.iter().zip(&means).map(|(a, m)| a - m).collect();
            pair_average_f64(&centered)
        })
        .collect();
    let (m, _) = mean_and_error(&infl);
    (m * t as f64 / (t as f64 - 1.0), infl)
}

/// Monte Carlo value of a functional, as `(value, influence values)`; the
/// standard error is the standard deviation of the influence values over
/// `sqrt(trials)`.
pub(crate) fn mc_term(rows: &[TrialRow], k: usize, functional: Functional) -> (f64, Vec<f64>) {
    let col = |g: &dyn Fn(&TrialRow) -> f64| -> (f64, Vec<f64>) {
        let xs: Vec<f64> = rows.iter().map(g).collect();
        (mean_and_error(&xs).0, xs)
    };
    match functional {
        Functional::Mse => col(&|r| r.mse),
        Functional::Sls => col(&|r| r.sls),
        Functional::PerFoldNoise => col(&|r| r.noise),
        Functional::Mean => col(&|r| r.full),
        Functional::FoldCov => pair_cov(&rows.iter().map(|r| r.hold.clone()).collect::<Vec<_>>()),
        Functional::CorrRisk => {
            let (v, infl) = pair_cov(&rows.iter().map(|r| r.risk.clone()).collect::<Vec<_>>());
            let c = (k as f64 - 1.0) / k as f64;
            (c * v, infl.into_iter().map(|x| c * x).collect())
        }
        Functional::CorrHold => {
            let e: Vec<f64> = rows.iter().map(|r| r.full).collect();
            let g: Vec<f64> = rows.iter().map(|r| r.gap).collect();
            let (v, infl) = sample_cov(&e, &g);
            (2.0 * v, infl.into_iter().map(|x| 2.0 * x).collect())
        }
        Functional::LossVar(_) => risk_var_term(&rows.iter().map(|r| (r.full, r.full_sq)).collect::<Vec<_>>()),
    }
}

/// `Var(L) = E[Var(L | S)] + Var(E[L | S])` from per-trial conditional
/// first and second moments.
pub(crate) fn risk_var_term(moments: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let t = moments.len() as f64;
    let within: Vec<f64> = moments.iter().map(|(a, b)| b - a * a).collect();
    let firsts: Vec<f64> = moments.iter().map(|(a, _)| *a).collect();
    let (w, _) = mean_and_error(&within);
    let (mean, _) = mean_and_error(&firsts);
    let dev: Vec<f64> = firsts.iter().map(|a| (a - mean) * (a - mean)).collect();
    let (between, _) = mean_and_error(&dev);
    let infl = within.iter().zip(&dev).map(|(a, b)| a + b).collect();
    (w + between * t / (t - 1.0), infl)
}

pub(crate) fn finish(value: f64, infl: &[f64], seed: u64) -> EstimateWithError {
    let (_, se) = mean_and_error(infl);
    EstimateWithError { value, std_error: se, trials: infl.len(), master_seed: seed }
}

pub fn mc_rows<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    scheme: &FoldScheme,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRow>> {
    mc_pass(trials, seed, |rng| {
        let pts = draw_sample(dist, scheme.n, rng);
        let ev = evaluate_sample(rule, &pts, scheme, dist)?;
        Ok(TrialRow::from(&Conditional::from_eval(&ev)))
    })
}

/// Monte Carlo estimate of `functional`, Rao-Blackwellized over the rule's
/// internal randomness.
pub fn mc_functional<R: LearningRule + ?Sized>(
    rule: &R,
    dist: &FiniteDistribution,
    n: usize,
    k: usize,
    functional: Functional,
    trials: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    let scheme = partition_folds(n, k)?;
    needs_pairs(functional, k)?;
    if let Functional::LossVar(size) = functional {
        let moments = mc_pass(trials, seed, |rng| {
            let pts = draw_sample(dist, size, rng);
            let r = risk_moments(&rule.train(&pts)?, dist)?;
            Ok((f(&r.mean), f(&r.second)))
        })?;
        let (v, infl) = risk_var_term(&moments);
        return Ok(finish(v, &infl, seed));
    }
    let rows = mc_rows(rule, dist, &scheme, trials, seed)?;
    let (v, infl) = mc_term(&rows, k, functional);
    Ok(finish(v, &infl, seed))
}
