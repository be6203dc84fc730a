//! Desk-scale runner for the invariants of every module.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::combinatorics::{rational, to_f64};
use crate::decomposition::{anticorr_fixture, bound_suite, decompose, stability_estimates, Mode};
use crate::engine::{
    cv_estimate, exact_functional, exact_pass, mc_functional, population_risk, trial_rng, Functional, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::linfield::{
    expected_loss_exact, linear_rule, rank_prob, solve_uniform, FqMatrix, LinearHypothesis, PrimeField, RankFormula,
};
use crate::majority::{
    cov_approx, cov_brute_force, cov_conditional, cov_exact, cov_single_exact, majority_rule, mse_majority, ApproxForm,
};
use crate::rule::{LearningRule, RandomTableRule};
use crate::squarewave::{
    cov_brute_force as sq_brute_force, cov_exact_factorized, floor_over_sqrt, squarewave_constants, theta_eval,
    ThetaMethod,
};
use crate::types::{partition_folds, ExactValue, FiniteDistribution, LabeledPoint, SampleTuple};

/// Which invariants to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Core,
    Decomposition,
    Majority,
    Linfield,
    Squarewave,
}

impl Suite {
    pub const MODULES: [Suite; 5] =
        [Suite::Core, Suite::Decomposition, Suite::Majority, Suite::Linfield, Suite::Squarewave];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Core => "core",
            Suite::Decomposition => "decomposition",
            Suite::Majority => "majority",
            Suite::Linfield => "linfield",
            Suite::Squarewave => "squarewave",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Suite::All)
            .chain(Suite::MODULES)
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResult {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct Recorder {
    module: &'static str,
    out: Vec<InvariantResult>,
}

impl Recorder {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.out.push(InvariantResult { module: self.module, name: name.to_string(), passed, detail });
    }
}

/// Runs the selected invariants; `seed` drives every randomized check.
pub fn run(suite: Suite, seed: u64) -> Vec<InvariantResult> {
    let modules: Vec<Suite> = if suite == Suite::All { Suite::MODULES.to_vec() } else { vec![suite] };
    let mut out = Vec::new();
    for m in modules {
        let mut rec = Recorder { module: m.as_str(), out: Vec::new() };
        match m {
            Suite::Core => core(&mut rec, seed),
            Suite::Decomposition => decomposition(&mut rec, seed),
            Suite::Majority => majority(&mut rec),
            Suite::Linfield => linfield(&mut rec, seed),
            Suite::Squarewave => squarewave(&mut rec, seed),
            Suite::All => unreachable!(),
        }
        out.extend(rec.out);
    }
    out
}

/// A small random instance: a distribution over up to two tokens and two or
/// three labels, a hashed table rule and a fold count dividing `n`, with at
/// most 4096 samples in the support of `D^n`.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub rule: RandomTableRule,
    pub dist: FiniteDistribution,
    pub n: usize,
    pub k: usize,
}

pub fn random_instance(seed: u64) -> Result<RandomInstance> {
    let mut rng = trial_rng(seed, 0);
    let tokens = rng.random_range(1..=2u32);
    let label_count = rng.random_range(2..=3u32);
    let mut support = Vec::new();
    for t in 0..tokens {
        for y in 0..label_count {
            if support.is_empty() || rng.random_bool(0.7) {
                support.push((LabeledPoint::token(t, y), rng.random_range(1..=5i64)));
            }
        }
    }
    let total: i64 = support.iter().map(|(_, w)| w).sum();
    let support: Vec<_> = support.into_iter().map(|(z, w)| (z, rational(w, total))).collect();
    let s = support.len();
    let max_n = (1..=8).rev().find(|&n| (s as u128).pow(n as u32) <= 4096).unwrap_or(1).max(2);
    let n = rng.random_range(2..=max_n);
    let divisors: Vec<usize> = (2..=n).filter(|k| n % k == 0).collect();
    let k = divisors[rng.random_range(0..divisors.len())];
    let rule = RandomTableRule::new(rng.random(), (0..tokens).collect(), label_count).randomized(rng.random_bool(0.5));
    Ok(RandomInstance { rule, dist: FiniteDistribution::new(support, label_count)?, n, k })
}

const FUNCTIONALS: [Functional; 7] = [
    Functional::Mse,
    Functional::Sls,
    Functional::FoldCov,
    Functional::PerFoldNoise,
    Functional::CorrHold,
    Functional::CorrRisk,
    Functional::Mean,
];

fn within(est: &crate::engine::EstimateWithError, exact: f64, z: f64) -> bool {
    (est.value - exact).abs() <= z * est.std_error + 1e-12
}

fn core(rec: &mut Recorder, seed: u64) {
    rec.check("monte carlo agrees with exact engine within 4 SE", || {
        let mut worst = 0.0f64;
        let mut ok = true;
        for t in 0..3 {
            let inst = random_instance(seed ^ (0xC0 + t))?;
            let mut functionals = FUNCTIONALS.to_vec();
            functionals.push(Functional::LossVar(inst.n - inst.n / inst.k));
            for f in functionals {
                let exact = to_f64(&exact_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, DEFAULT_BUDGET)?);
                let est = mc_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, 4000, seed.wrapping_add(t))?;
                let z = if est.std_error > 0.0 { (est.value - exact).abs() / est.std_error } else { 0.0 };
                worst = worst.max(z);
                ok &= within(&est, exact, 4.0);
            }
        }
        Ok((ok, format!("largest |z| = {worst:.3}")))
    });
    rec.check("cv estimate invariant under fold relabeling", || {
        let mut rng = trial_rng(seed, 1);
        let inst = random_instance(seed ^ 0xC1)?;
        let scheme = partition_folds(inst.n, inst.k)?;
        for _ in 0..20 {
            let pts: Vec<LabeledPoint> = (0..inst.n).map(|_| inst.dist.sample(&mut rng)).collect();
            let relabeled: Vec<LabeledPoint> =
                scheme.blocks().into_iter().rev().flat_map(|b| pts[b].to_vec()).collect();
            let a = cv_estimate(&inst.rule, &SampleTuple::new(pts)?, &scheme)?;
            let b = cv_estimate(&inst.rule, &SampleTuple::new(relabeled)?, &scheme)?;
            if a != b {
                return Ok((false, format!("{a} != {b}")));
            }
        }
        Ok((true, "20 samples".into()))
    });
    rec.check("population risk in [0, 1] and closed form equals support sum", || {
        let mut rng = trial_rng(seed, 2);
        let inst = random_instance(seed ^ 0xC2)?;
        for _ in 0..20 {
            let pts: Vec<LabeledPoint> = (0..inst.n).map(|_| inst.dist.sample(&mut rng)).collect();
            let r = population_risk(&inst.rule.train(&pts)?, &inst.dist)?;
            if r < ExactValue::zero() || r > ExactValue::one() {
                return Ok((false, format!("risk {r}")));
            }
        }
        let field = PrimeField::new(3)?;
        let truth = vec![1, 2, 0];
        let dist = FiniteDistribution::uniform_linear(3, &truth)?;
        for _ in 0..20 {
            let h = LinearHypothesis { coeffs: field.random_vector(3, &mut rng), q: 3 };
            let closed = h.to_hypothesis().with_risk(h.risk_against(&truth));
            if closed.risk(&dist)? != h.to_hypothesis().support_risk(&dist)? {
                return Ok((false, format!("{:?}", h.coeffs)));
            }
        }
        Ok((true, "20 mixtures, 20 linear hypotheses".into()))
    });
    rec.check("exact engine independent of support ordering", || {
        let inst = random_instance(seed ^ 0xC3)?;
        let order: Vec<usize> = (0..inst.dist.len()).rev().collect();
        let permuted = inst.dist.permuted(&order)?;
        for f in FUNCTIONALS {
            let a = exact_functional(&inst.rule, &inst.dist, inst.n, inst.k, f, DEFAULT_BUDGET)?;
            let b = exact_functional(&inst.rule, &permuted, inst.n, inst.k, f, DEFAULT_BUDGET)?;
            if a != b {
                return Ok((false, format!("{f:?}: {a} != {b}")));
            }
        }
        Ok((true, format!("{} functionals", FUNCTIONALS.len())))
    });
}

fn decomposition(rec: &mut Recorder, seed: u64) {
    rec.check("exact residual is zero", || {
        let mut count = 0;
        for n in [2, 4, 6] {
            let (rule, dist) = anticorr_fixture(n)?;
            let half = FiniteDistribution::bernoulli(rational(1, 2))?;
            for k in (1..=n).filter(|k| n % k == 0) {
                for r in [
                    decompose(&rule, &dist, n, k, Mode::exact())?,
                    decompose(&majority_rule(), &half, n, k, Mode::exact())?,
                ] {
                    count += 1;
                    if !r.residual.exact().is_some_and(|v| v.is_zero()) {
                        return Ok((false, format!("n={n} k={k}: residual {}", r.residual)));
                    }
                }
            }
        }
        for t in 0..10 {
            let inst = random_instance(seed ^ (0xD0 + t))?;
            let r = decompose(&inst.rule, &inst.dist, inst.n, inst.k, Mode::exact())?;
            count += 1;
            if !r.residual.exact().is_some_and(|v| v.is_zero()) {
                return Ok((false, format!("{inst:?}: residual {}", r.residual)));
            }
        }
        Ok((true, format!("{count} instances")))
    });
    rec.check("bound suite holds on random instances", || {
        let mut failures = Vec::new();
        for t in 0..20 {
            let inst = random_instance(seed ^ (0xD100 + t))?;
            let r = decompose(&inst.rule, &inst.dist, inst.n, inst.k, Mode::exact())?;
            let p = stability_estimates(&inst.rule, &inst.dist, inst.n, inst.n / inst.k, Mode::exact())?;
            for c in bound_suite(&r, &p)? {
                if !c.holds {
                    failures.push(format!("seed {}: {} ({} > {})", seed ^ (0xD100 + t), c.name, c.lhs, c.rhs));
                }
            }
        }
        Ok((failures.is_empty(), if failures.is_empty() { "20 instances".into() } else { failures.join("; ") }))
    });
    rec.check("fold covariance equal across fold pairs", || {
        for t in 0..5 {
            let mut inst = random_instance(seed ^ (0xD200 + t))?;
            inst.n = 3;
            inst.k = 3;
            let scheme = partition_folds(3, 3)?;
            let z = ExactValue::zero;
            let (mut h0, mut h1, mut h2, mut h01, mut h02) = (z(), z(), z(), z(), z());
            exact_pass(&inst.rule, &inst.dist, &scheme, DEFAULT_BUDGET, |ev, w| {
                let h = |i: usize| &ev.folds[i].hold;
                h0 += h(0) * w;
                h1 += h(1) * w;
                h2 += h(2) * w;
                h01 += h(0) * h(1) * w;
                h02 += h(0) * h(2) * w;
                Ok(())
            })?;
            let (a, b) = (&h01 - &h0 * &h1, &h02 - &h0 * &h2);
            if a != b {
                return Ok((false, format!("pair (1,2) {a} vs pair (1,3) {b}")));
            }
        }
        Ok((true, "5 rules, k = 3".into()))
    });
    rec.check("fold covariance at least -1/(4(n-m))", || {
        let mut worst = f64::INFINITY;
        for t in 0..20 {
            let inst = random_instance(seed ^ (0xD300 + t))?;
            let m = inst.n / inst.k;
            let cov = exact_functional(&inst.rule, &inst.dist, inst.n, inst.k, Functional::FoldCov, DEFAULT_BUDGET)?;
            let floor = rational(-1, 4 * (inst.n - m) as i64);
            worst = worst.min(to_f64(&(&cov - &floor)));
            if cov < floor {
                return Ok((false, format!("{inst:?}: {cov} < {floor}")));
            }
        }
        Ok((true, format!("smallest slack {worst:.4}")))
    });
}

fn majority(rec: &mut Recorder) {
    let grid: Vec<(usize, usize)> =
        (2..=16).flat_map(|n| (1..=n / 2).filter(move |m| n % m == 0).map(move |m| (n, m))).collect();
    rec.check("exact covariance equals brute force, n <= 16", || {
        for &(n, m) in &grid {
            if cov_exact(n, m)? != cov_brute_force(n, m)? {
                return Ok((false, format!("n={n} m={m}")));
            }
        }
        Ok((true, format!("{} pairs", grid.len())))
    });
    rec.check("conditional form equals exact, both parities", || {
        let mut parities = [0; 2];
        for &(n, m) in &grid {
            parities[(n - m) % 2] += 1;
            if cov_exact(n, m)? != cov_conditional(n, m)? {
                return Ok((false, format!("n={n} m={m}")));
            }
        }
        Ok((parities[0] > 0 && parities[1] > 0, format!("{} even, {} odd", parities[0], parities[1])))
    });
    rec.check("single-point closed form", || {
        for n in 2..=200 {
            if cov_exact(n, 1)? != cov_single_exact(n)? {
                return Ok((false, format!("n={n}")));
            }
        }
        Ok((true, "2 <= n <= 200".into()))
    });
    rec.check("sublinear form within 5% at n = 3000", || {
        let mut worst = 0.0f64;
        for m in [30, 100, 300, 1000] {
            let exact = to_f64(&cov_exact(3000, m)?);
            worst = worst.max((cov_approx(3000, m, ApproxForm::Sublinear)? / exact - 1.0).abs());
        }
        Ok((worst <= 0.05, format!("largest relative error {worst:.4}")))
    });
    rec.check("mse matches exact engine, n <= 12", || {
        let half = FiniteDistribution::bernoulli(rational(1, 2))?;
        let mut count = 0;
        for n in 1..=12 {
            for k in (1..=n).filter(|k| n % k == 0) {
                let engine = exact_functional(&majority_rule(), &half, n, k, Functional::Mse, DEFAULT_BUDGET)?;
                count += 1;
                if engine != mse_majority(n, n / k)? {
                    return Ok((false, format!("n={n} k={k}")));
                }
            }
        }
        Ok((true, format!("{count} pairs")))
    });
}

fn linfield(rec: &mut Recorder, seed: u64) {
    rec.check("rank formulas agree and sum to one", || {
        let mut count = 0;
        for q in [2, 3, 5] {
            for n1 in 0..=8 {
                for n2 in 0..=8 {
                    let mut total = ExactValue::zero();
                    for r in 0..=n1.min(n2) {
                        let p = rank_prob(n1, n2, r, q, RankFormula::Product)?;
                        if p != rank_prob(n1, n2, r, q, RankFormula::Sum)? {
                            return Ok((false, format!("q={q} {n1}x{n2} r={r}")));
                        }
                        total += p;
                        count += 1;
                    }
                    if !total.is_one() {
                        return Ok((false, format!("q={q} {n1}x{n2} sums to {total}")));
                    }
                }
            }
        }
        Ok((true, format!("{count} probabilities")))
    });
    rec.check("empirical rank frequencies within 4 sigma", || {
        let (worst, ok) = rank_frequency_check(&[(2, 4, 4), (3, 3, 5), (5, 6, 2), (2, 6, 6)], 20_000, seed)?;
        Ok((ok, format!("largest |z| = {worst:.3}")))
    });
    rec.check("coset sampling is uniform", || {
        let p = coset_uniformity_p_value(10_000, seed)?;
        Ok((p > 1e-3, format!("chi-square p = {p:.4}")))
    });
    rec.check("expected loss matches Monte Carlo rule risk", || {
        let mut worst = 0.0f64;
        let mut ok = true;
        for (q, d) in [(2u32, 2usize), (3, 2), (2, 3)] {
            let truth = vec![0; d];
            let dist = FiniteDistribution::uniform_linear(q, &truth)?;
            let rule = linear_rule(d, q)?;
            for n in 1..=d + 1 {
                let exact = to_f64(&expected_loss_exact(n, d, q as u64)?.l_bar);
                let est = mc_functional(&rule, &dist, n, 1, Functional::Mean, 2000, seed ^ n as u64)?;
                if est.std_error > 0.0 {
                    worst = worst.max((est.value - exact).abs() / est.std_error);
                }
                ok &= within(&est, exact, 3.0);
            }
        }
        Ok((ok, format!("largest |z| = {worst:.3}")))
    });
    rec.check("linear hypothesis risk is 0 or 1 - 1/q", || {
        let mut rng = trial_rng(seed, 3);
        let mut count = 0;
        for (q, d) in [(2u32, 4usize), (3, 3), (5, 2), (7, 3)] {
            let field = PrimeField::new(q)?;
            let truth = field.random_vector(d, &mut rng);
            let dist = FiniteDistribution::uniform_linear(q, &truth)?;
            let wrong = rational(q as i64 - 1, q as i64);
            for _ in 0..10 {
                let coeffs = field.random_vector(d, &mut rng);
                let r = LinearHypothesis { coeffs: coeffs.clone(), q }.to_hypothesis().support_risk(&dist)?;
                let expected = if coeffs == truth { ExactValue::zero() } else { wrong.clone() };
                count += 1;
                if r != expected {
                    return Ok((false, format!("q={q} {coeffs:?}: {r}")));
                }
            }
        }
        Ok((true, format!("{count} hypotheses")))
    });
}

/// Largest `|z|` of empirical rank counts against the exact law over the
/// given `(q, rows, cols)` shapes, with a half-count continuity correction.
pub fn rank_frequency_check(shapes: &[(u32, usize, usize)], draws: usize, seed: u64) -> Result<(f64, bool)> {
    let mut worst = 0.0f64;
    let mut ok = true;
    for (s, &(q, n1, n2)) in shapes.iter().enumerate() {
        let field = PrimeField::new(q)?;
        let mut counts = vec![0usize; n1.min(n2) + 1];
        let mut rng: ChaCha8Rng = trial_rng(seed, 100 + s as u64);
        for _ in 0..draws {
            counts[FqMatrix::random(n1, n2, field, &mut rng).rank()] += 1;
        }
        for (r, &c) in counts.iter().enumerate() {
            let p = to_f64(&rank_prob(n1, n2, r, q as u64, RankFormula::Product)?);
            let mean = draws as f64 * p;
            let sd = (mean * (1.0 - p)).sqrt();
            let dev = ((c as f64 - mean).abs() - 0.5).max(0.0);
            if sd > 0.0 {
                worst = worst.max(dev / sd);
            }
            ok &= dev <= 4.0 * sd;
        }
    }
    Ok((worst, ok))
}

/// Chi-square p-value of uniform sampling over the 9-element solution coset
/// of a rank-2 system in `F_3^4`.
pub fn coset_uniformity_p_value(draws: usize, seed: u64) -> Result<f64> {
    let field = PrimeField::new(3)?;
    let x = FqMatrix::from_rows(&[vec![1, 2, 0, 1], vec![0, 1, 1, 2]], 4, field)?;
    let y = [2, 1];
    let mut rng = trial_rng(seed, 4);
    let elements = crate::linfield::solve(&x, &y)?.elements();
    let mut counts = vec![0usize; elements.len()];
    for _ in 0..draws {
        let (_, h) = solve_uniform(&x, &y, &mut rng)?;
        let i = elements.iter().position(|e| *e == h.coeffs).ok_or(Error::Inconsistent)?;
        counts[i] += 1;
    }
    let expected = draws as f64 / elements.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let chi = ChiSquared::new((elements.len() - 1) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(1.0 - chi.cdf(stat))
}

fn squarewave(rec: &mut Recorder, seed: u64) {
    rec.check("factorized covariance equals brute force, n <= 18", || {
        let mut count = 0;
        for n in 2..=18 {
            for m in (1..=n / 2).filter(|m| n % m == 0) {
                count += 1;
                if cov_exact_factorized(n, m)? != sq_brute_force(n, m)? {
                    return Ok((false, format!("n={n} m={m}")));
                }
            }
        }
        Ok((true, format!("{count} pairs")))
    });
    rec.check("integer floor agrees with big-integer square root", || {
        let mut rng = trial_rng(seed, 5);
        for _ in 0..10_000 {
            let u: u64 = rng.random_range(0..1u64 << 32);
            let m: u64 = rng.random_range(1..1u64 << 20);
            let oracle = (num_bigint::BigUint::from(u) * u / m).sqrt();
            if num_bigint::BigUint::from(floor_over_sqrt(u, m)) != oracle {
                return Ok((false, format!("u={u} m={m}")));
            }
        }
        Ok((true, "10000 random pairs".into()))
    });
    rec.check("m cov within c0 +- (Delta(R) + m^-1/2)", || {
        let k = squarewave_constants();
        let mut worst = 0.0f64;
        for m in [64, 144, 256] {
            for ratio in [1, 2] {
                let cov = to_f64(&cov_exact_factorized(m * (ratio + 2), m)?);
                let err = (m as f64 * cov - k.c0).abs();
                let bound = k.delta(ratio as f64) + (m as f64).powf(-0.5);
                worst = worst.max(err / bound);
                if err > bound {
                    return Ok((false, format!("m={m} R={ratio}: {err} > {bound}")));
                }
            }
        }
        Ok((true, format!("largest error / bound {worst:.4}")))
    });
    rec.check("theta lattice and series agree on 1000 points", || {
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let delta = i as f64 / 1000.0;
            let a = theta_eval(delta, ThetaMethod::Lattice, 8)?;
            let b = theta_eval(delta, ThetaMethod::Series, 8)?;
            worst = worst.max((a - b).abs());
        }
        Ok((worst <= 1e-12, format!("largest gap {worst:.3e}")))
    });
    rec.check("factorized covariance positive for R >= 1", || {
        for m in 1..=40 {
            for ratio in 1..=4 {
                if cov_exact_factorized(m * (ratio + 2), m)? <= ExactValue::zero() {
                    return Ok((false, format!("m={m} R={ratio}")));
                }
            }
        }
        Ok((true, "m <= 40, R <= 4".into()))
    });
}
