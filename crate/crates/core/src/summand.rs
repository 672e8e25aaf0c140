//! Structural description of Euler-sum summands.
//!
//! Text grammar (whitespace is insignificant between items):
//!
//! ```text
//! descriptor := ["alt"] numerator ["/" denominator]
//! numerator  := "1" | item+
//! item       := factor | inner
//! factor     := ("H" | "h" | "a") ["[" n "]"] ["@k-1"] ["^" power]
//! inner      := "S" ["[" ("k" | "k-1" | "2k") "]"] "(" descriptor ")" ["^" power]
//! denominator:= dfactor+
//! dfactor    := ("k" | "(" base ")") ["^" power]
//! base       := "k" | "2k-1" | "2k+1" | "k+p" | "2k+2p-1" | "k-p"
//! ```
//!
//! `alt` multiplies the k-th term by (-1)^(k+1); `a` is the alternating
//! harmonic number a_k^(n) = Σ_{j≤k} (-1)^(j+1)/j^n. `p` is the single free
//! parameter slot; a `(k-p)` factor drops the singular term k = p. Inner
//! sums run over their own index up to the stated limit (default `k`) and may
//! not nest.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{HarmKind, HarmonicCache, Rational};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub kind: HarmKind,
    pub order: u32,
    /// evaluate at k-1 instead of k
    pub shifted: bool,
    pub power: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Base {
    K,
    TwoKMinus1,
    TwoKPlus1,
    KPlusP,
    TwoKPlus2PMinus1,
    /// k - p; the singular term k = p is dropped (the k ≠ i convention).
    KMinusP,
}

impl Base {
    /// (alpha, beta) with base = alpha*k + beta, for parameter value p.
    pub fn affine(self, p: i64) -> (i64, i64) {
        match self {
            Base::K => (1, 0),
            Base::TwoKMinus1 => (2, -1),
            Base::TwoKPlus1 => (2, 1),
            Base::KPlusP => (1, p),
            Base::TwoKPlus2PMinus1 => (2, 2 * p - 1),
            Base::KMinusP => (1, -p),
        }
    }

    pub fn uses_param(self) -> bool {
        matches!(self, Base::KPlusP | Base::TwoKPlus2PMinus1 | Base::KMinusP)
    }

    fn text(self) -> &'static str {
        match self {
            Base::K => "k",
            Base::TwoKMinus1 => "2k-1",
            Base::TwoKPlus1 => "2k+1",
            Base::KPlusP => "k+p",
            Base::TwoKPlus2PMinus1 => "2k+2p-1",
            Base::KMinusP => "k-p",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DenomFactor {
    pub base: Base,
    pub power: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Limit {
    K,
    KMinus1,
    TwoK,
}

impl Limit {
    pub fn upper(self, k: u64) -> u64 {
        match self {
            Limit::K => k,
            Limit::KMinus1 => k - 1,
            Limit::TwoK => 2 * k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InnerSum {
    pub term: SumDescriptor,
    pub limit: Limit,
    pub power: u32,
}

/// One Euler-sum summand: sign pattern, harmonic factors, optional inner
/// partial sum, denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SumDescriptor {
    pub alt: bool,
    pub factors: Vec<Factor>,
    pub inner: Option<Box<InnerSum>>,
    pub denom: Vec<DenomFactor>,
}

/// Why a descriptor converges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub degree: u32,
    pub alternating: bool,
}

impl SumDescriptor {
    pub fn parse(s: &str) -> Result<Self, Error> {
        let mut p = Parser { s: s.as_bytes(), i: 0, src: s };
        let d = p.descriptor(false)?;
        p.ws();
        if p.i != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(d)
    }

    /// Merge repeated factors and order everything canonically.
    pub fn normalized(&self) -> Self {
        let mut factors: Vec<Factor> = Vec::new();
        let mut fs = self.factors.clone();
        fs.sort();
        for f in fs {
            match factors.last_mut() {
                Some(l) if l.kind == f.kind && l.order == f.order && l.shifted == f.shifted => l.power += f.power,
                _ => factors.push(f),
            }
        }
        let mut denom: Vec<DenomFactor> = Vec::new();
        let mut ds = self.denom.clone();
        ds.sort();
        for d in ds {
            match denom.last_mut() {
                Some(l) if l.base == d.base => l.power += d.power,
                _ => denom.push(d),
            }
        }
        let inner = self.inner.as_ref().map(|b| {
            Box::new(InnerSum { term: b.term.normalized(), limit: b.limit, power: b.power })
        });
        SumDescriptor { alt: self.alt, factors, inner, denom }
    }

    pub fn degree(&self) -> u32 {
        self.denom.iter().map(|d| d.power).sum()
    }

    /// Does the numerator carry an alternating harmonic number?
    pub fn has_alt_factor(&self) -> bool {
        self.factors.iter().any(|f| f.kind == HarmKind::Alt)
    }

    pub fn has_param(&self) -> bool {
        self.denom.iter().any(|d| d.base.uses_param())
    }

    /// Convergence certificate for an infinite sum of this summand.
    pub fn validate(&self) -> Result<Certificate, Error> {
        let degree = self.degree();
        if let Some(inner) = &self.inner {
            if inner.term.has_param() {
                return Err(Error::Invalid("inner sums may not use the parameter".into()));
            }
        }
        if degree >= 2 || (degree >= 1 && self.alt) {
            Ok(Certificate { degree, alternating: self.alt })
        } else if self.alt {
            Err(Error::Invalid(format!("alternating summand {self} needs denominator degree >= 1")))
        } else {
            Err(Error::Invalid(format!(
                "summand {self} has denominator degree {degree} < 2 and no alternation"
            )))
        }
    }

    /// Largest harmonic order referenced anywhere.
    pub fn symbols(&self) -> Vec<(HarmKind, u32)> {
        let mut v: Vec<(HarmKind, u32)> = self.factors.iter().map(|f| (f.kind, f.order)).collect();
        if let Some(i) = &self.inner {
            v.extend(i.term.symbols());
        }
        v.sort();
        v.dedup();
        v
    }

    /// Log-power bound: total harmonic-1 multiplicity, counting the inner sum.
    pub fn log_degree(&self) -> u32 {
        let own: u32 = self.factors.iter().filter(|f| f.order == 1).map(|f| f.power).sum();
        let inner = self.inner.as_ref().map_or(0, |i| (i.term.log_degree() + 1) * i.power);
        own + inner
    }

    /// Exact value of the k-th term. `p` must be supplied iff the summand uses it.
    pub fn term_exact(&self, k: u64, p: Option<i64>, cache: &mut HarmonicCache) -> Result<Rational, Error> {
        if k == 0 {
            return Err(Error::Domain("terms are indexed from 1".into()));
        }
        let p = self.check_param(p)?;
        let mut v = Rational::one();
        for f in &self.factors {
            let idx = if f.shifted { k - 1 } else { k };
            let h = cache.get(f.kind, f.order, idx);
            v *= pow_rat(&h, f.power);
        }
        if let Some(inner) = &self.inner {
            let s = cache.inner_prefix(&inner.term, inner.limit.upper(k))?;
            v *= pow_rat(&s, inner.power);
        }
        let mut den = BigInt::one();
        for d in &self.denom {
            let (a, b) = d.base.affine(p);
            let base = a as i128 * k as i128 + b as i128;
            if base == 0 {
                if d.base == Base::KMinusP {
                    return Ok(Rational::zero());
                }
                return Err(Error::Domain(format!("zero denominator at k = {k}")));
            }
            den *= BigInt::from(base).pow(d.power);
        }
        v /= Rational::from_integer(den);
        if self.alt && k % 2 == 0 {
            v = -v;
        }
        Ok(v)
    }

    pub(crate) fn check_param(&self, p: Option<i64>) -> Result<i64, Error> {
        match (self.has_param(), p) {
            (true, Some(p)) if p >= 1 => Ok(p),
            (true, Some(p)) => Err(Error::Domain(format!("parameter must be >= 1, got {p}"))),
            (true, None) => Err(Error::Arity(format!("{self} needs a parameter value"))),
            (false, Some(_)) => Err(Error::Arity(format!("{self} takes no parameter"))),
            (false, None) => Ok(0),
        }
    }
}

fn pow_rat(r: &Rational, n: u32) -> Rational {
    let mut out = Rational::one();
    for _ in 0..n {
        out *= r;
    }
    out
}

impl HarmonicCache {
    /// Σ_{i ≤ upper} term(i), exact, with prefix sums cached per summand.
    pub fn inner_prefix(&mut self, term: &SumDescriptor, upper: u64) -> Result<Rational, Error> {
        if term.inner.is_some() {
            return Err(Error::Invalid("inner sums may not nest".into()));
        }
        let key = term.to_string();
        let mut table = self.take_prefix(&key);
        while table.len() as u64 <= upper {
            let i = table.len() as u64;
            let t = term.term_exact(i, None, self)?;
            let next = table.last().unwrap() + t;
            table.push(next);
        }
        let v = table[upper as usize].clone();
        self.put_prefix(key, table);
        Ok(v)
    }
}

impl fmt::Display for SumDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.alt {
            parts.push("alt".into());
        }
        let mut num: Vec<String> = self.factors.iter().map(factor_text).collect();
        if let Some(i) = &self.inner {
            let lim = match i.limit {
                Limit::K => "",
                Limit::KMinus1 => "[k-1]",
                Limit::TwoK => "[2k]",
            };
            let pw = if i.power > 1 { format!("^{}", i.power) } else { String::new() };
            num.push(format!("S{lim}({}){pw}", i.term));
        }
        if num.is_empty() {
            num.push("1".into());
        }
        parts.extend(num);
        if !self.denom.is_empty() {
            parts.push("/".into());
            for d in &self.denom {
                let b = if d.base == Base::K { "k".to_string() } else { format!("({})", d.base.text()) };
                if d.power > 1 {
                    parts.push(format!("{b}^{}", d.power));
                } else {
                    parts.push(b);
                }
            }
        }
        f.write_str(&parts.join(" "))
    }
}

fn factor_text(f: &Factor) -> String {
    let mut s = f.kind.symbol().to_string();
    if f.order > 1 {
        s += &format!("[{}]", f.order);
    }
    if f.shifted {
        s += "@k-1";
    }
    if f.power > 1 {
        s += &format!("^{}", f.power);
    }
    s
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at column {} in summand {:?}", self.i + 1, self.src))
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(lit.as_bytes()) {
            self.i += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), Error> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {lit:?}")))
        }
    }

    fn number(&mut self) -> Result<u32, Error> {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if st == self.i {
            return Err(self.err("expected a number"));
        }
        let n: u32 = self.src[st..self.i].parse().map_err(|_| self.err("number too large"))?;
        Ok(n)
    }

    fn power(&mut self) -> Result<u32, Error> {
        if self.eat("^") {
            let n = self.number()?;
            if n == 0 {
                return Err(self.err("powers must be >= 1"));
            }
            Ok(n)
        } else {
            Ok(1)
        }
    }

    fn descriptor(&mut self, in_inner: bool) -> Result<SumDescriptor, Error> {
        let alt = self.eat("alt");
        let mut factors = Vec::new();
        let mut inner = None;
        if self.eat("1") {
            // empty numerator
        } else {
            loop {
                match self.peek() {
                    Some(c @ (b'H' | b'h' | b'a')) => {
                        self.i += 1;
                        let kind = match c {
                            b'H' => HarmKind::Full,
                            b'h' => HarmKind::Odd,
                            _ => HarmKind::Alt,
                        };
                        let order = if self.eat("[") {
                            let n = self.number()?;
                            self.expect("]")?;
                            n
                        } else {
                            1
                        };
                        if order == 0 {
                            return Err(self.err("harmonic order must be >= 1"));
                        }
                        let shifted = self.eat("@k-1");
                        let power = self.power()?;
                        factors.push(Factor { kind, order, shifted, power });
                    }
                    Some(b'S') => {
                        if in_inner {
                            return Err(self.err("inner sums may not nest"));
                        }
                        if inner.is_some() {
                            return Err(self.err("at most one inner sum"));
                        }
                        self.i += 1;
                        let limit = if self.eat("[") {
                            let l = if self.eat("k-1") {
                                Limit::KMinus1
                            } else if self.eat("2k") {
                                Limit::TwoK
                            } else if self.eat("k") {
                                Limit::K
                            } else {
                                return Err(self.err("inner limit must be k, k-1 or 2k"));
                            };
                            self.expect("]")?;
                            l
                        } else {
                            Limit::K
                        };
                        self.expect("(")?;
                        let term = self.descriptor(true)?;
                        self.expect(")")?;
                        let power = self.power()?;
                        inner = Some(Box::new(InnerSum { term, limit, power }));
                    }
                    _ => break,
                }
            }
            if factors.is_empty() && inner.is_none() {
                return Err(self.err("empty numerator (write 1)"));
            }
        }
        let mut denom = Vec::new();
        if self.eat("/") {
            loop {
                let base = match self.peek() {
                    Some(b'k') => {
                        self.i += 1;
                        Base::K
                    }
                    Some(b'(') => {
                        self.i += 1;
                        let b = if self.eat("2k+2p-1") {
                            Base::TwoKPlus2PMinus1
                        } else if self.eat("2k-1") {
                            Base::TwoKMinus1
                        } else if self.eat("2k+1") {
                            Base::TwoKPlus1
                        } else if self.eat("k+p") {
                            Base::KPlusP
                        } else if self.eat("k-p") {
                            Base::KMinusP
                        } else if self.eat("k") {
                            Base::K
                        } else {
                            return Err(self.err("unknown denominator base"));
                        };
                        self.expect(")")?;
                        b
                    }
                    _ => break,
                };
                let power = self.power()?;
                if in_inner && base.uses_param() {
                    return Err(self.err("inner sums may not use the parameter"));
                }
                denom.push(DenomFactor { base, power });
            }
            if denom.is_empty() {
                return Err(self.err("empty denominator"));
            }
        }
        Ok(SumDescriptor { alt, factors, inner, denom }.normalized())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, rint};

    fn d(s: &str) -> SumDescriptor {
        SumDescriptor::parse(s).unwrap()
    }

    #[test]
    fn term_examples() {
        let mut c = HarmonicCache::new();
        assert_eq!(d("H^3 / k^2").term_exact(2, None, &mut c).unwrap(), rat(27, 32));
        assert_eq!(d("h^3 / k (2k-1)").term_exact(1, None, &mut c).unwrap(), rint(1));
        assert_eq!(d("H / k (k+p)").term_exact(3, Some(1), &mut c).unwrap(), rat(11, 72));
    }

    #[test]
    fn param_arity() {
        let mut c = HarmonicCache::new();
        assert!(matches!(d("H / k (k+p)").term_exact(3, None, &mut c), Err(Error::Arity(_))));
        assert!(matches!(d("H / k^2").term_exact(3, Some(2), &mut c), Err(Error::Arity(_))));
    }

    #[test]
    fn validation() {
        assert!(d("H / k").validate().is_err());
        assert!(d("alt H^3 / k^3").validate().is_ok());
        assert!(d("H^3 / k (2k-1)").validate().is_ok());
        assert!(d("alt H@k-1 / k").validate().is_ok());
    }

    #[test]
    fn round_trip_and_canonical() {
        for s in [
            "H^3 / k (2k-1)",
            "alt H^3 / k^3",
            "h^2 h[2]@k-1 / (2k-1)^2",
            "H S(h / k) / k^2",
            "S[k-1](H[2] / k) / (2k+1)",
            "H / k (k+p)",
            "h[2] / k (2k+2p-1)",
            "1 / k^2",
            "S[2k](alt 1 / k)",
        ] {
            let x = d(s);
            assert_eq!(x.to_string(), s, "canonical form of {s}");
            assert_eq!(d(&x.to_string()), x);
        }
        assert_eq!(d("h H h / (2k-1) k k").to_string(), "H h^2 / k^2 (2k-1)");
    }

    #[test]
    fn parse_errors() {
        for s in ["", "H /", "H / (3k)", "S(S(h/k)/k)/k^2", "H^0/k^2", "Q/k^2", "H / k^2 junk"] {
            assert!(SumDescriptor::parse(s).is_err(), "{s} should not parse");
        }
    }

    #[test]
    fn inner_sum_exact() {
        let mut c = HarmonicCache::new();
        // Σ_{i≤2} h_i/i = 1 + (4/3)/2 = 5/3, times H_2/2^2 = 3/8
        let v = d("H S(h / k) / k^2").term_exact(2, None, &mut c).unwrap();
        assert_eq!(v, rat(5, 3) * rat(3, 8));
        let v = d("S[k-1](H / k)").term_exact(1, None, &mut c).unwrap();
        assert_eq!(v, rint(0));
        let v = d("S[2k](alt 1 / k)").term_exact(1, None, &mut c).unwrap();
        assert_eq!(v, rat(1, 2));
    }

    #[test]
    fn alternating_sign() {
        let mut c = HarmonicCache::new();
        let x = d("alt 1 / k^2");
        assert_eq!(x.term_exact(1, None, &mut c).unwrap(), rint(1));
        assert_eq!(x.term_exact(2, None, &mut c).unwrap(), rat(-1, 4));
    }
}
