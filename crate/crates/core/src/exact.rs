//! Exact rationals, Bernoulli numbers, generalized harmonic numbers and the
//! per-k lemma checker.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::catalog::{IdentityEntry, Kind};
use crate::Error;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Bernoulli number B_n (B_1 = -1/2).
pub fn bernoulli(n: u32) -> Rational {
    static TABLE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let t = TABLE.get_or_init(|| Mutex::new(vec![Rational::one()]));
    let mut t = t.lock().unwrap();
    while t.len() <= n as usize {
        // B_m = -1/(m+1) Σ_{k<m} C(m+1,k) B_k
        let m = t.len();
        let mut binom = BigInt::one();
        let mut acc = Rational::zero();
        for (k, b) in t.iter().enumerate() {
            acc += b * Rational::from_integer(binom.clone());
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        t.push(-acc / Rational::from_integer(BigInt::from(m + 1)));
    }
    t[n as usize].clone()
}

/// Harmonic families: H_k^(n) = Σ 1/j^n, h_k^(n) = Σ 1/(2j-1)^n and the
/// alternating a_k^(n) = Σ (-1)^(j+1)/j^n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum HarmKind {
    /// H
    Full,
    /// h
    Odd,
    /// a
    Alt,
}

impl HarmKind {
    pub fn symbol(self) -> char {
        match self {
            HarmKind::Full => 'H',
            HarmKind::Odd => 'h',
            HarmKind::Alt => 'a',
        }
    }

    /// The j-th base: j or 2j-1.
    pub fn base(self, j: u64) -> u64 {
        match self {
            HarmKind::Full | HarmKind::Alt => j,
            HarmKind::Odd => 2 * j - 1,
        }
    }

    /// Sign of the j-th increment.
    pub fn sign(self, j: u64) -> i64 {
        if self == HarmKind::Alt && j % 2 == 0 {
            -1
        } else {
            1
        }
    }
}

/// Exact harmonic number; k = 0 is the empty sum.
pub fn harmonic(kind: HarmKind, k: u64, n: u32) -> Rational {
    assert!(n >= 1, "harmonic order must be >= 1");
    let mut acc = Rational::zero();
    for j in 1..=k {
        acc += Rational::new(BigInt::from(kind.sign(j)), BigInt::from(kind.base(j)).pow(n));
    }
    acc
}

/// Prefix tables of H_k^(n), h_k^(n), grown on demand.
#[derive(Clone, Debug, Default)]
pub struct HarmonicCache {
    tables: HashMap<(HarmKind, u32), Vec<Rational>>,
    inner: HashMap<String, Vec<Rational>>,
}

impl HarmonicCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, kind: HarmKind, n: u32, k: u64) -> Rational {
        let t = self.tables.entry((kind, n)).or_insert_with(|| vec![Rational::zero()]);
        while t.len() as u64 <= k {
            let j = t.len() as u64;
            let next = t.last().unwrap() + Rational::new(BigInt::from(kind.sign(j)), BigInt::from(kind.base(j)).pow(n));
            t.push(next);
        }
        t[k as usize].clone()
    }

    pub(crate) fn take_prefix(&mut self, key: &str) -> Vec<Rational> {
        self.inner.remove(key).unwrap_or_else(|| vec![Rational::zero()])
    }

    pub(crate) fn put_prefix(&mut self, key: String, table: Vec<Rational>) {
        self.inner.insert(key, table);
    }

    pub fn max_index(&self, kind: HarmKind, n: u32) -> u64 {
        self.tables.get(&(kind, n)).map_or(0, |t| t.len() as u64 - 1)
    }
}

/// Outcome of an exact finite-lemma check at one k.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaCheck {
    pub k: u64,
    pub lhs: Rational,
    pub rhs: Rational,
    pub pass: bool,
}

/// Evaluate both sides of a finite identity exactly at index k.
pub fn check_finite_lemma(entry: &IdentityEntry, k: u64, cache: &mut HarmonicCache) -> Result<LemmaCheck, Error> {
    if entry.kind != Kind::FiniteIdentity {
        return Err(Error::Lookup(format!("{} is not a finite identity", entry.id)));
    }
    if k == 0 {
        return Err(Error::Domain("finite lemmas are indexed from k = 1".into()));
    }
    let lhs = entry.lhs.eval_exact_at(k, cache)?;
    let rhs = entry.rhs.eval_exact_at(k, cache)?;
    let pass = lhs == rhs;
    Ok(LemmaCheck { k, lhs, rhs, pass })
}
