//! Learning rules: maps from a training tuple to a hypothesis mixture.

use std::collections::BTreeMap;

use crate::combinatorics::rational;
use crate::error::Result;
use crate::types::{Feature, Hypothesis, HypothesisMixture, LabeledPoint};

/// A possibly randomized learning rule. The returned mixture is the law of
/// the output hypothesis; independent calls correspond to independent runs.
pub trait LearningRule: Send + Sync {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture>;

    /// Whether `train` is invariant under permutations of its input.
    fn is_symmetric(&self) -> bool {
        true
    }

    fn name(&self) -> String;
}

impl<R: LearningRule + ?Sized> LearningRule for &R {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        (**self).train(sample)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<R: LearningRule + ?Sized> LearningRule for Box<R> {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        (**self).train(sample)
    }
    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Always returns the same constant hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRule {
    pub label: u32,
}

impl LearningRule for ConstantRule {
    fn train(&self, _sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        Ok(HypothesisMixture::single(Hypothesis::constant(self.label)))
    }

    fn name(&self) -> String {
        format!("constant-{}", self.label)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Pseudo-random rule over token features: the output depends on the training
/// multiset (or, when `ordered`, on the sequence) through a seeded hash. With
/// `randomized` set, the output is a two-atom mixture of lookup tables.
#[derive(Debug, Clone)]
pub struct RandomTableRule {
    pub seed: u64,
    pub tokens: Vec<u32>,
    pub label_count: u32,
    pub randomized: bool,
    pub ordered: bool,
}

impl RandomTableRule {
    pub fn new(seed: u64, tokens: Vec<u32>, label_count: u32) -> Self {
        RandomTableRule { seed, tokens, label_count, randomized: false, ordered: false }
    }

    pub fn randomized(mut self, yes: bool) -> Self {
        self.randomized = yes;
        self
    }

    /// Drops symmetry: the hash sees the sample in order.
    pub fn ordered(mut self, yes: bool) -> Self {
        self.ordered = yes;
        self
    }

    fn digest(&self, sample: &[LabeledPoint]) -> u64 {
        let mut keys: Vec<u64> = sample
            .iter()
            .map(|z| {
                let x = match &z.x {
                    Feature::Token(t) => *t as u64,
                    Feature::Vector(v) => v.iter().fold(17u64, |h, &c| splitmix(h ^ c as u64)),
                };
                (x << 16) ^ z.y as u64
            })
            .collect();
        if !self.ordered {
            keys.sort_unstable();
        }
        keys.iter().fold(splitmix(self.seed ^ sample.len() as u64), |h, &k| splitmix(h ^ k))
    }

    fn table(&self, mut h: u64) -> (Hypothesis, u64) {
        let mut table = BTreeMap::new();
        for &t in &self.tokens {
            h = splitmix(h);
            table.insert(Feature::Token(t), (h % self.label_count as u64) as u32);
        }
        (Hypothesis::table(table), h)
    }
}

impl LearningRule for RandomTableRule {
    fn train(&self, sample: &[LabeledPoint]) -> Result<HypothesisMixture> {
        let (first, h) = self.table(self.digest(sample));
        if !self.randomized {
            return Ok(HypothesisMixture::single(first));
        }
        let (second, h) = self.table(splitmix(h));
        if second == first {
            return Ok(HypothesisMixture::single(first));
        }
        let num = 1 + (splitmix(h) % 3) as i64;
        HypothesisMixture::new(vec![(first, rational(num, 4)), (second, rational(4 - num, 4))])
    }

    fn is_symmetric(&self) -> bool {
        !self.ordered
    }

    fn name(&self) -> String {
        format!("random-table-{}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_table_is_symmetric_unless_ordered() {
        let rule = RandomTableRule::new(7, vec![0, 1, 2], 2).randomized(true);
        let a = [LabeledPoint::token(0, 1), LabeledPoint::token(2, 0), LabeledPoint::token(1, 1)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(rule.train(&a).unwrap(), rule.train(&b).unwrap());
        assert!(rule.is_symmetric());
        assert!(!rule.clone().ordered(true).is_symmetric());
    }
}
