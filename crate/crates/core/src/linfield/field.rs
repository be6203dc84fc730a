//! Arithmetic and Gaussian elimination over a prime field `Z_q`.

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{ExactValue, Hypothesis};

use crate::combinatorics::rational;

/// A prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u32,
}

impl PrimeField {
    pub fn new(q: u32) -> Result<Self> {
        let prime =
            q >= 2 && (2..).take_while(|d: &u32| (*d as u64) * (*d as u64) <= q as u64).all(|d| !q.is_multiple_of(d));
        if !prime {
            return Err(Error::InvalidParameter(format!("field size {q} is not prime")));
        }
        Ok(PrimeField { q })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.q as u64) as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.q as u64 - b as u64) % self.q as u64) as u32
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(!a.is_multiple_of(self.q), "zero has no inverse");
        let (mut base, mut e, mut acc) = (a as u64 % self.q as u64, self.q as u64 - 2, 1u64);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % self.q as u64;
            }
            base = base * base % self.q as u64;
            e >>= 1;
        }
        acc as u32
    }

    pub fn dot(&self, a: &[u32], b: &[u32]) -> u32 {
        let s = a.iter().zip(b).fold(0u64, |acc, (x, y)| (acc + *x as u64 * *y as u64) % self.q as u64);
        s as u32
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<u32> {
        (0..len).map(|_| rng.random_range(0..self.q)).collect()
    }
}

/// Dense matrix over `Z_q`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FqMatrix {
    rows: usize,
    cols: usize,
    field: PrimeField,
    data: Vec<u32>,
}

impl FqMatrix {
    pub fn new(rows: usize, cols: usize, field: PrimeField, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        if let Some(v) = data.iter().find(|&&v| v >= field.q()) {
            return Err(Error::OutOfRange(format!("entry {v} not below q = {}", field.q())));
        }
        Ok(FqMatrix { rows, cols, field, data })
    }

    pub fn from_rows(rows: &[Vec<u32>], cols: usize, field: PrimeField) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, field, data)
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, field: PrimeField, rng: &mut R) -> Self {
        FqMatrix { rows, cols, field, data: field.random_vector(rows * cols, rng) }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rank(&self) -> usize {
        let mut e = Echelon::new(self.cols, self.field);
        for i in 0..self.rows {
            e.insert(self.row(i));
        }
        e.rank()
    }
}

/// Incrementally maintained row-echelon basis of a subspace of `F_q^cols`.
#[derive(Debug, Clone)]
pub struct Echelon {
    field: PrimeField,
    cols: usize,
    /// Basis rows, each normalized to a leading 1 at its pivot.
    basis: Vec<(usize, Vec<u32>)>,
}

impl Echelon {
    pub fn new(cols: usize, field: PrimeField) -> Self {
        Echelon { field, cols, basis: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Reduces `v` against the basis; the result is zero iff `v` lies in the span.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let f = self.field;
        let mut out = v.to_vec();
        for (p, row) in &self.basis {
            let c = out[*p];
            if c != 0 {
                for (o, r) in out.iter_mut().zip(row) {
                    *o = f.sub(*o, f.mul(c, *r));
                }
            }
        }
        out
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    /// Adds `v` to the span; returns whether the dimension grew.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        debug_assert_eq!(v.len(), self.cols);
        let f = self.field;
        let mut r = self.reduce(v);
        let Some(p) = r.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = f.inv(r[p]);
        for x in r.iter_mut() {
            *x = f.mul(*x, inv);
        }
        for (_, row) in self.basis.iter_mut() {
            let c = row[p];
            if c != 0 {
                for (a, b) in row.iter_mut().zip(&r) {
                    *a = f.sub(*a, f.mul(c, *b));
                }
            }
        }
        self.basis.push((p, r));
        true
    }
}

/// Linear functional `x -> <a, x> mod q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearHypothesis {
    pub coeffs: Vec<u32>,
    pub q: u32,
}

impl LinearHypothesis {
    pub fn predict(&self, x: &[u32]) -> u32 {
        let s = self.coeffs.iter().zip(x).fold(0u64, |acc, (a, b)| (acc + *a as u64 * *b as u64) % self.q as u64);
        s as u32
    }

    /// Risk against the ground truth under uniform features: `0` when the
    /// functionals coincide, `1 - 1/q` otherwise.
    pub fn risk_against(&self, truth: &[u32]) -> ExactValue {
        if self.coeffs == truth {
            rational(0, 1)
        } else {
            rational(self.q as i64 - 1, self.q as i64)
        }
    }

    pub fn to_hypothesis(&self) -> Hypothesis {
        Hypothesis::linear(self.coeffs.clone(), self.q)
    }
}

/// Solution set `{a : X a = y}`: a particular solution plus the span of a
/// nullspace basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionCoset {
    pub field: PrimeField,
    pub particular: Vec<u32>,
    pub nullspace: Vec<Vec<u32>>,
}

impl SolutionCoset {
    pub fn dimension(&self) -> usize {
        self.nullspace.len()
    }

    /// `q^{d - r}`.
    pub fn size(&self) -> BigUint {
        BigUint::from(self.field.q()).pow(self.nullspace.len() as u32)
    }

    /// `particular + sum_i c_i * basis_i`.
    pub fn element(&self, coords: &[u32]) -> Vec<u32> {
        let f = self.field;
        let mut out = self.particular.clone();
        for (c, b) in coords.iter().zip(&self.nullspace) {
            for (o, v) in out.iter_mut().zip(b) {
                *o = f.add(*o, f.mul(*c, *v));
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        let coords = self.field.random_vector(self.nullspace.len(), rng);
        self.element(&coords)
    }

    /// Every element, in lexicographic order of the nullspace coordinates.
    pub fn elements(&self) -> Vec<Vec<u32>> {
        let q = self.field.q();
        let dim = self.nullspace.len();
        let count = (q as usize).pow(dim as u32);
        (0..count)
            .map(|mut idx| {
                let coords: Vec<u32> = (0..dim)
                    .map(|_| {
                        let c = (idx % q as usize) as u32;
                        idx /= q as usize;
                        c
                    })
                    .collect();
                self.element(&coords)
            })
            .collect()
    }
}

/// Reduced row echelon solve of `X a = y` over `Z_q`.
pub fn solve(x: &FqMatrix, y: &[u32]) -> Result<SolutionCoset> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { expected: x.rows(), got: y.len() });
    }
    let f = x.field();
    let (rows, cols) = (x.rows(), x.cols());
    let mut aug: Vec<Vec<u32>> = (0..rows)
        .map(|i| {
            let mut r = x.row(i).to_vec();
            r.push(y[i] % f.q());
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut lead = 0;
    for col in 0..cols {
        let Some(p) = (lead..rows).find(|&i| aug[i][col] != 0) else {
            continue;
        };
        aug.swap(lead, p);
        let inv = f.inv(aug[lead][col]);
        for v in aug[lead].iter_mut() {
            *v = f.mul(*v, inv);
        }
        for i in 0..rows {
            if i != lead && aug[i][col] != 0 {
                let c = aug[i][col];
                let pivot_row = aug[lead].clone();
                for (a, b) in aug[i].iter_mut().zip(&pivot_row) {
                    *a = f.sub(*a, f.mul(c, *b));
                }
            }
        }
        pivots.push(col);
        lead += 1;
        if lead == rows {
            break;
        }
    }
    if aug[lead..].iter().any(|r| r[cols] != 0) {
        return Err(Error::Inconsistent);
    }
    let mut particular = vec![0u32; cols];
    for (i, &c) in pivots.iter().enumerate() {
        particular[c] = aug[i][cols];
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let nullspace = free
        .iter()
        .map(|&fc| {
            let mut v = vec![0u32; cols];
            v[fc] = 1;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = f.sub(0, aug[i][fc]);
            }
            v
        })
        .collect();
    Ok(SolutionCoset { field: f, particular, nullspace })
}

/// Solves `X a = y` and draws one consistent functional uniformly.
pub fn solve_uniform<R: Rng + ?Sized>(
    x: &FqMatrix,
    y: &[u32],
    rng: &mut R,
) -> Result<(SolutionCoset, LinearHypothesis)> {
    let coset = solve(x, y)?;
    let coeffs = coset.sample(rng);
    let q = x.field().q();
    Ok((coset, LinearHypothesis { coeffs, q }))
}
