//! Gaussian binomial coefficients and the rank law of uniform matrices.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinatorics::{rational_pow, to_f64};
use crate::decomposition::BoundCheck;
use crate::error::{Error, Result};
use crate::types::ExactValue;

/// Number of `k`-dimensional subspaces of `F_q^n`.
pub fn gaussian_coefficient(n: usize, k: usize, q: u64) -> Result<ExactValue> {
    if k > n {
        return Err(Error::OutOfRange(format!("subspace dimension {k} exceeds {n}")));
    }
    let qb = BigInt::from(q);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k {
        num *= qb.pow((n - i) as u32) - 1;
        den *= qb.pow((k - i) as u32) - 1;
    }
    Ok(BigRational::new(num, den))
}

/// The two closed forms of the rank probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankFormula {
    /// Alternating sum over sub-ranks.
    Sum,
    /// `[n2 r]_q q^{n1 (r - n2)} prod_{s<r} (1 - q^{s - n1})`.
    Product,
}

/// Probability that a uniform `n1 x n2` matrix over `F_q` has rank `r`.
pub fn rank_prob(n1: usize, n2: usize, r: usize, q: u64, formula: RankFormula) -> Result<ExactValue> {
    if r > n1.min(n2) {
        return Err(Error::OutOfRange(format!("rank {r} exceeds min({n1}, {n2})")));
    }
    let lead = gaussian_coefficient(n2, r, q)?;
    let (n1i, n2i, ri) = (n1 as i64, n2 as i64, r as i64);
    match formula {
        RankFormula::Sum => {
            let mut total = ExactValue::zero();
            for l in 0..=r {
                let li = l as i64;
                let d = ri - li;
                let term = gaussian_coefficient(r, l, q)? * rational_pow(q, n1i * (li - n2i) + d * (d - 1) / 2);
                if d % 2 == 0 {
                    total += term;
                } else {
                    total -= term;
                }
            }
            Ok(lead * total)
        }
        RankFormula::Product => {
            let mut acc = lead * rational_pow(q, n1i * (ri - n2i));
            for s in 0..ri {
                acc *= ExactValue::one() - rational_pow(q, s - n1i);
            }
            Ok(acc)
        }
    }
}

/// Exact rank law of a uniform `n1 x n2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    pub q: u64,
    pub n1: usize,
    pub n2: usize,
    pub probs: Vec<ExactValue>,
}

impl RankDistribution {
    pub fn new(n1: usize, n2: usize, q: u64) -> Result<Self> {
        let probs = (0..=n1.min(n2)).map(|r| rank_prob(n1, n2, r, q, RankFormula::Product)).collect::<Result<_>>()?;
        Ok(RankDistribution { q, n1, n2, probs })
    }

    pub fn prob(&self, r: usize) -> ExactValue {
        self.probs.get(r).cloned().unwrap_or_default()
    }

    pub fn max_rank(&self) -> usize {
        self.n1.min(self.n2)
    }
}

/// Multiplier applied to the `O(.)` envelopes of the rank law.
pub const RANK_ENVELOPE: f64 = 4.0;

/// Checks the rank-deficiency envelope: `1 - P(full rank) <= 4 q^{-(D+1)}`
/// for `j = 0`, and `P(rank = min - j) <= 4 q^{-j (D + j)}` for `j >= 1`,
/// where `D = |n1 - n2|`.
pub fn rank_asymptotics_check(n1: usize, n2: usize, j: usize, q: u64) -> Result<BoundCheck> {
    let dist = RankDistribution::new(n1, n2, q)?;
    let m0 = dist.max_rank();
    let delta = n1.abs_diff(n2) as i64;
    let (name, lhs, exponent) = if j == 0 {
        ("full rank complement", ExactValue::one() - dist.prob(m0), delta + 1)
    } else {
        let p = if j > m0 { ExactValue::zero() } else { dist.prob(m0 - j) };
        ("rank deficiency", p, j as i64 * (delta + j as i64))
    };
    let rhs = RANK_ENVELOPE * (q as f64).powi(-(exponent as i32));
    let lhs = to_f64(&lhs);
    Ok(BoundCheck { name: format!("{name} j={j} ({n1}x{n2}, q={q})"), lhs, rhs, holds: lhs <= rhs, slack: rhs - lhs })
}
