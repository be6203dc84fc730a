//! Samples, distributions, hypotheses and fold schemes.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Exact rational value; every exhaustive computation is carried out in it.
pub type ExactValue = BigRational;

/// Feature of a labeled point: an opaque token, or a vector over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Token(u32),
    Vector(Vec<u32>),
}

impl Feature {
    fn same_kind(&self, other: &Feature) -> bool {
        match (self, other) {
            (Feature::Token(_), Feature::Token(_)) => true,
            (Feature::Vector(a), Feature::Vector(b)) => a.len() == b.len(),
            _ => false,
        }
    }
}

/// One observation `z = (x, y)`. Labels are `0/1` for binary problems or
/// elements of `Z_q` for the linear problems.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledPoint {
    pub x: Feature,
    pub y: u32,
}

impl LabeledPoint {
    pub fn token(x: u32, y: u32) -> Self {
        LabeledPoint { x: Feature::Token(x), y }
    }

    pub fn vector(x: Vec<u32>, y: u32) -> Self {
        LabeledPoint { x: Feature::Vector(x), y }
    }
}

/// Distribution with finite support and exact masses.
#[derive(Debug, Clone)]
pub struct FiniteDistribution {
    support: Vec<(LabeledPoint, ExactValue)>,
    label_count: u32,
    cumulative: Vec<f64>,
}

impl FiniteDistribution {
    /// Masses must be positive and sum to exactly one, points must be distinct
    /// and share one feature representation, labels must lie below
    /// `label_count`.
    pub fn new(support: Vec<(LabeledPoint, ExactValue)>, label_count: u32) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if label_count < 2 {
            return Err(Error::InvalidDistribution("need at least two labels".into()));
        }
        let mut seen = BTreeSet::new();
        let mut total = ExactValue::zero();
        for (z, mass) in &support {
            if !mass.is_positive() {
                return Err(Error::InvalidDistribution(format!("non-positive mass {mass}")));
            }
            if z.y >= label_count {
                return Err(Error::InvalidDistribution(format!("label {} outside 0..{label_count}", z.y)));
            }
            if !z.x.same_kind(&support[0].0.x) {
                return Err(Error::InvalidDistribution("mixed feature representations".into()));
            }
            if !seen.insert(z.clone()) {
                return Err(Error::InvalidDistribution(format!("duplicate point {z:?}")));
            }
            total += mass;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = support
            .iter()
            .map(|(_, m)| {
                acc += m.to_f64().unwrap_or(0.0);
                acc
            })
            .collect();
        Ok(FiniteDistribution { support, label_count, cumulative })
    }

    /// Binary labels `Ber(p)` on a single feature token. The feature marginal
    /// is irrelevant to rules that only look at labels.
    pub fn bernoulli(p: ExactValue) -> Result<Self> {
        if p.is_negative() || p > ExactValue::one() {
            return Err(Error::InvalidDistribution(format!("Bernoulli parameter {p}")));
        }
        let mut support = Vec::new();
        let q = ExactValue::one() - &p;
        if q.is_positive() {
            support.push((LabeledPoint::token(0, 0), q));
        }
        if p.is_positive() {
            support.push((LabeledPoint::token(0, 1), p));
        }
        Self::new(support, 2)
    }

    /// Uniform features over `F_q^d` labeled by the linear functional `truth`.
    /// The support has `q^d` points, so this is for small fields only.
    pub fn uniform_linear(q: u32, truth: &[u32]) -> Result<Self> {
        let d = truth.len();
        let size = (q as u64)
            .checked_pow(d as u32)
            .filter(|&s| s <= 1 << 20)
            .ok_or_else(|| Error::InvalidDistribution(format!("q^d = {q}^{d} is too large to list")))?;
        let mass = ExactValue::new(1.into(), (size as i64).into());
        let mut support = Vec::with_capacity(size as usize);
        for idx in 0..size {
            let mut x = Vec::with_capacity(d);
            let mut rest = idx;
            for _ in 0..d {
                x.push((rest % q as u64) as u32);
                rest /= q as u64;
            }
            let y = x.iter().zip(truth).map(|(a, b)| (*a as u64) * (*b as u64)).sum::<u64>() % q as u64;
            support.push((LabeledPoint::vector(x, y as u32), mass.clone()));
        }
        Self::new(support, q)
    }

    pub fn support(&self) -> &[(LabeledPoint, ExactValue)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    /// Same distribution with the support listed in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let support = order.iter().map(|&i| self.support[i].clone()).collect();
        Self::new(support, self.label_count)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let u: f64 = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.support.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledPoint {
        self.support[self.sample_index(rng)].0.clone()
    }
}

/// Ordered sample `(Z_1, ..., Z_n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTuple {
    points: Vec<LabeledPoint>,
}

impl SampleTuple {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("sample must contain at least one point".into()));
        }
        Ok(SampleTuple { points })
    }

    /// Binary-labeled sample on a single token.
    pub fn from_labels(labels: &[u32]) -> Result<Self> {
        Self::new(labels.iter().map(|&y| LabeledPoint::token(0, y)).collect())
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Pointwise behaviour of a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predictor {
    /// Outputs the same label everywhere.
    Constant(u32),
    /// `x -> <coeffs, x> mod q`.
    Linear { coeffs: Vec<u32>, q: u32 },
    /// Explicit lookup table over feature values.
    Table(BTreeMap<Feature, u32>),
    /// No pointwise predictor; only the closed-form risk is known.
    Opaque,
}

/// A hypothesis `h`, optionally carrying its closed-form population risk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub predictor: Predictor,
    pub closed_form_risk: Option<ExactValue>,
}

impl Hypothesis {
    pub fn constant(label: u32) -> Self {
        Hypothesis { predictor: Predictor::Constant(label), closed_form_risk: None }
    }

    pub fn linear(coeffs: Vec<u32>, q: u32) -> Self {
        Hypothesis { predictor: Predictor::Linear { coeffs, q }, closed_form_risk: None }
    }

    pub fn table(table: BTreeMap<Feature, u32>) -> Self {
        Hypothesis { predictor: Predictor::Table(table), closed_form_risk: None }
    }

    /// A hypothesis known only through its risk.
    pub fn opaque(risk: ExactValue) -> Self {
        Hypothesis { predictor: Predictor::Opaque, closed_form_risk: Some(risk) }
    }

    pub fn with_risk(mut self, risk: ExactValue) -> Self {
        self.closed_form_risk = Some(risk);
        self
    }

    pub fn predict(&self, x: &Feature) -> Result<u32> {
        match (&self.predictor, x) {
            (Predictor::Constant(c), _) => Ok(*c),
            (Predictor::Linear { coeffs, q }, Feature::Vector(v)) if v.len() == coeffs.len() => {
                let q = *q as u64;
                let s = coeffs.iter().zip(v).map(|(a, b)| (*a as u64) * (*b as u64) % q).sum::<u64>();
                Ok((s % q) as u32)
            }
            (Predictor::Linear { .. }, _) => {
                Err(Error::DomainMismatch("linear hypothesis applied to a non-matching feature".into()))
            }
            (Predictor::Table(t), x) => {
                t.get(x).copied().ok_or_else(|| Error::DomainMismatch(format!("feature {x:?} missing from table")))
            }
            (Predictor::Opaque, _) => Err(Error::DomainMismatch("hypothesis has no pointwise predictor".into())),
        }
    }

    /// 0-1 loss at a single point.
    pub fn loss(&self, z: &LabeledPoint) -> Result<bool> {
        Ok(self.predict(&z.x)? != z.y)
    }

    /// Risk computed by summing over the support, ignoring any closed form.
    pub fn support_risk(&self, dist: &FiniteDistribution) -> Result<ExactValue> {
        let mut risk = ExactValue::zero();
        for (z, mass) in dist.support() {
            if let Predictor::Constant(c) = self.predictor {
                if c >= dist.label_count() {
                    return Err(Error::DomainMismatch(format!("label {c} outside 0..{}", dist.label_count())));
                }
            }
            if self.loss(z)? {
                risk += mass;
            }
        }
        Ok(risk)
    }

    /// Population 0-1 risk; the closed form wins when present.
    pub fn risk(&self, dist: &FiniteDistribution) -> Result<ExactValue> {
        match &self.closed_form_risk {
            Some(r) => Ok(r.clone()),
            None => self.support_risk(dist),
        }
    }
}

/// Finite mixture of hypotheses describing a randomized rule's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisMixture {
    atoms: Vec<(Hypothesis, ExactValue)>,
}

impl HypothesisMixture {
    pub fn new(atoms: Vec<(Hypothesis, ExactValue)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMixture("no atoms".into()));
        }
        let mut total = ExactValue::zero();
        for (_, w) in &atoms {
            if !w.is_positive() {
                return Err(Error::InvalidMixture(format!("non-positive weight {w}")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(HypothesisMixture { atoms })
    }

    pub fn single(h: Hypothesis) -> Self {
        HypothesisMixture { atoms: vec![(h, ExactValue::one())] }
    }

    pub fn atoms(&self) -> &[(Hypothesis, ExactValue)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Draws one hypothesis according to the mixture weights.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &Hypothesis {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (h, w) in &self.atoms {
            acc += w.to_f64().unwrap_or(0.0);
            if u < acc {
                return h;
            }
        }
        &self.atoms[self.atoms.len() - 1].0
    }
}

/// Partition of `{0, .., n-1}` into `k` contiguous blocks of size `m = n/k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldScheme {
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

impl FoldScheme {
    /// Zero-based index range of block `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        i * self.m..(i + 1) * self.m
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        (0..self.k).map(|i| self.block(i)).collect()
    }

    /// The training portion `S_{-i}`, in sample order.
    pub fn complement<T: Clone>(&self, sample: &[T], i: usize) -> Vec<T> {
        let b = self.block(i);
        sample[..b.start].iter().chain(&sample[b.end..]).cloned().collect()
    }
}

pub fn partition_folds(n: usize, k: usize) -> Result<FoldScheme> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!("n={n} and k={k} must be positive")));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::NotDivisible { n, k });
    }
    Ok(FoldScheme { n, k, m: n / k })
}
