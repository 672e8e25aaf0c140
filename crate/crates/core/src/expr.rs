//! Mixed expressions: rational combinations of atom monomials, infinite sums
//! `[descriptor]` and point values `{descriptor}`.
//!
//! ```text
//! expr   := ["+"|"-"] term (("+"|"-") term)*
//! term   := factor ("*" factor)*
//! factor := int ["/" int] | atom ["^" n] | "[" descriptor "]" | "{" descriptor "}"
//! ```
//!
//! `[d]` is Σ_{k≥1} d(k). `{d}` is the single term d(k) at the entry's index:
//! the free index of a finite identity, or k = p in a parametrized one. Sums
//! in one term multiply.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::constants::{canonical_cmp, fmt_coef, Atom, ClosedForm, Conventions, Monomial};
use crate::eval::{evaluate_sum, EvalConfig};
use crate::exact::{HarmonicCache, Rational};
use crate::hp::HPReal;
use crate::summand::SumDescriptor;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SumRef {
    Series(SumDescriptor),
    Point(SumDescriptor),
}

impl SumRef {
    pub fn descriptor(&self) -> &SumDescriptor {
        match self {
            SumRef::Series(d) | SumRef::Point(d) => d,
        }
    }
}

impl fmt::Display for SumRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SumRef::Series(d) => write!(f, "[{d}]"),
            SumRef::Point(d) => write!(f, "{{{d}}}"),
        }
    }
}

/// Key of one term: product of sums (possibly none) times an atom monomial.
pub type Symbol = (Vec<SumRef>, Monomial);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expr {
    pub terms: BTreeMap<Symbol, Rational>,
}

/// What numeric evaluation needs beyond the expression itself.
#[derive(Clone, Debug)]
pub struct NumCtx {
    pub cfg: EvalConfig,
    pub conv: Conventions,
    /// parameter value for parametrized entries
    pub p: Option<i64>,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, c: Rational, s: Symbol) {
        let e = self.terms.entry(s.clone()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&s);
        }
    }

    pub fn add(&self, o: &Expr) -> Expr {
        let mut r = self.clone();
        for (s, c) in &o.terms {
            r.add_term(c.clone(), s.clone());
        }
        r
    }

    pub fn scale(&self, k: &Rational) -> Expr {
        let mut r = Expr::zero();
        for (s, c) in &self.terms {
            r.add_term(c * k, s.clone());
        }
        r
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.add(&o.scale(&-Rational::one()))
    }

    pub fn from_closed_form(cf: &ClosedForm) -> Expr {
        let mut r = Expr::zero();
        for (m, c) in &cf.terms {
            r.add_term(c.clone(), (Vec::new(), m.clone()));
        }
        r
    }

    pub fn parse(s: &str) -> Result<Expr, Error> {
        Lexer { s: s.as_bytes(), i: 0, src: s }.expr()
    }

    pub fn sums(&self) -> impl Iterator<Item = &SumRef> {
        self.terms.keys().flat_map(|(s, _)| s.iter())
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut v: Vec<Atom> = self.terms.keys().flat_map(|(_, m)| m.atoms().copied()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn is_closed_form(&self) -> bool {
        self.sums().next().is_none()
    }

    pub fn closed_form(&self) -> Result<ClosedForm, Error> {
        let mut cf = ClosedForm::zero();
        for ((s, m), c) in &self.terms {
            if let Some(s) = s.first() {
                return Err(Error::Invalid(format!("closed form may not contain the sum {s}")));
            }
            cf.add_term(c.clone(), m.clone());
        }
        Ok(cf)
    }

    /// Exact value at index k; only point values and rationals are allowed.
    pub fn eval_exact_at(&self, k: u64, cache: &mut HarmonicCache) -> Result<Rational, Error> {
        let mut acc = Rational::zero();
        for ((s, m), c) in &self.terms {
            if !m.is_one() {
                return Err(Error::Invalid(format!("atom monomial {m} has no exact value")));
            }
            let mut v = c.clone();
            for s in s {
                match s {
                    SumRef::Point(d) => v *= d.term_exact(k, None, cache)?,
                    SumRef::Series(d) => {
                        return Err(Error::Invalid(format!("infinite sum [{d}] has no exact value")));
                    }
                }
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Numeric value and absolute error bound.
    pub fn eval_numeric(&self, ctx: &NumCtx) -> Result<(HPReal, HPReal), Error> {
        let digits = ctx.cfg.digits;
        let prec = ctx.cfg.prec();
        let mut val = HPReal::zero(prec);
        let mut bound = HPReal::zero(prec);
        let mut cache = HarmonicCache::new();
        for ((s, m), c) in &self.terms {
            let (mv, mb) = m.eval(digits, &ctx.conv)?;
            let mut sv = HPReal::one(prec);
            let mut sb = HPReal::zero(prec);
            for s in s {
                let (x, xb) = match s {
                    SumRef::Series(d) => {
                        let p = if d.has_param() { ctx.p } else { None };
                        let r = evaluate_sum(d, &ctx.cfg, p)?;
                        (r.value, r.bound)
                    }
                    SumRef::Point(d) => {
                        let k = ctx.p.ok_or_else(|| Error::Arity(format!("point value {{{d}}} needs an index")))?;
                        let p = if d.has_param() { Some(k) } else { None };
                        let k = u64::try_from(k).map_err(|_| Error::Domain("negative index".into()))?;
                        (HPReal::from_rational(&d.term_exact(k, p, &mut cache)?, prec), HPReal::zero(prec))
                    }
                };
                // |xy - x'y'| <= |x| e_y + |y| e_x + e_x e_y
                sb = &(&(&sv.abs() * &xb) + &(&x.abs() * &sb)) + &(&sb * &xb);
                sv = &sv * &x;
            }
            let t = (&mv * &sv).mul_rational(c);
            val += &t;
            let ca = c.abs();
            bound += &(&(&mv.abs() * &sb) + &(&sv.abs() * &mb)).mul_rational(&ca);
        }
        Ok((val, bound))
    }

    /// Terms in canonical order: series, point values, then closed-form part by weight.
    pub fn canonical(&self) -> Vec<(&Symbol, &Rational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| {
            let (sa, ma) = a.0;
            let (sb, mb) = b.0;
            let rank = |s: &[SumRef]| match s.first() {
                Some(SumRef::Series(_)) => 0,
                Some(SumRef::Point(_)) => 1,
                None => 2,
            };
            let text = |s: &[SumRef]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
            rank(sa)
                .cmp(&rank(sb))
                .then_with(|| text(sa).cmp(&text(sb)))
                .then_with(|| canonical_cmp(ma, mb))
        });
        v
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut out = String::new();
        for (i, ((s, m), c)) in self.canonical().into_iter().enumerate() {
            let neg = c.is_negative();
            out += match (i, neg) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            };
            let mut parts = Vec::new();
            let a = c.abs();
            if !a.is_one() || (m.is_one() && s.is_empty()) {
                parts.push(fmt_coef(&a));
            }
            if !m.is_one() {
                parts.push(m.to_string());
            }
            for s in s {
                parts.push(s.to_string());
            }
            out += &parts.join("*");
        }
        f.write_str(&out)
    }
}

struct Lexer<'a> {
    s: &'a [u8],
    i: usize,
    src: &'a str,
}

impl Lexer<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in '{}'", self.i, self.src))
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

    fn int(&mut self) -> Result<BigInt, Error> {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if st == self.i {
            return Err(self.err("expected integer"));
        }
        Ok(self.src[st..self.i].parse().unwrap())
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut e = Expr::zero();
        let mut first = true;
        loop {
            let sign = match self.peek() {
                None if !first => break,
                None => return Err(self.err("empty expression")),
                Some(b'+') => {
                    self.i += 1;
                    1
                }
                Some(b'-') => {
                    self.i += 1;
                    -1
                }
                Some(_) if first => 1,
                Some(_) => return Err(self.err("expected '+' or '-'")),
            };
            first = false;
            let (c, sym) = self.term()?;
            e.add_term(c * Rational::from_integer(sign.into()), sym);
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<(Rational, Symbol), Error> {
        let mut c = Rational::one();
        let mut m = Monomial::one();
        let mut sums: Vec<SumRef> = Vec::new();
        loop {
            match self.peek() {
                Some(b'0'..=b'9') => {
                    let n = self.int()?;
                    let mut r = Rational::from_integer(n);
                    if self.peek() == Some(b'/') {
                        self.i += 1;
                        let d = self.int()?;
                        if d.is_zero() {
                            return Err(self.err("zero denominator"));
                        }
                        r /= Rational::from_integer(d);
                    }
                    c *= r;
                }
                Some(open @ (b'[' | b'{')) => {
                    let close = if open == b'[' { b']' } else { b'}' };
                    self.i += 1;
                    let st = self.i;
                    let mut depth = 0i32;
                    while self.i < self.s.len() {
                        let ch = self.s[self.i];
                        if ch == close && depth == 0 {
                            break;
                        }
                        if ch == b'[' {
                            depth += 1;
                        } else if ch == b']' {
                            depth -= 1;
                        }
                        self.i += 1;
                    }
                    if self.i >= self.s.len() {
                        return Err(self.err("unterminated sum"));
                    }
                    let d = SumDescriptor::parse(&self.src[st..self.i])?.normalized();
                    self.i += 1;
                    sums.push(if open == b'[' { SumRef::Series(d) } else { SumRef::Point(d) });
                }
                Some(ch) if ch.is_ascii_alphabetic() => {
                    let st = self.i;
                    while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
                        self.i += 1;
                    }
                    let a = Atom::parse(&self.src[st..self.i]).map_err(|_| self.err("unknown atom"))?;
                    let mut pw = 1u32;
                    if self.peek() == Some(b'^') {
                        self.i += 1;
                        pw = self.int()?.try_into().map_err(|_| self.err("bad power"))?;
                        if pw == 0 {
                            return Err(self.err("zero power"));
                        }
                    }
                    for _ in 0..pw {
                        m = m.mul(&Monomial::atom(a));
                    }
                }
                _ => return Err(self.err("expected factor")),
            }
            if self.peek() == Some(b'*') {
                self.i += 1;
            } else {
                break;
            }
        }
        sums.sort();
        Ok((c, (sums, m)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;

    #[test]
    fn parse_and_print() {
        let e = Expr::parse("3/2*[h^2 / k^3] + 2*[h h[2] / k^2] - z2*l2 + 1").unwrap();
        assert_eq!(e.terms.len(), 4);
        let t = e.to_string();
        assert_eq!(Expr::parse(&t).unwrap(), e);
        assert!(t.starts_with("3/2*[h^2 / k^3]") || t.starts_with("2*[h h[2] / k^2]"));
    }

    #[test]
    fn terms_merge() {
        let e = Expr::parse("[H / k^2] - 1/2*[H/k^2] - 1/2*[H / k^2]").unwrap();
        assert!(e.terms.is_empty());
        assert_eq!(e.to_string(), "0");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("z9").is_err());
        assert!(Expr::parse("[H/k^2] [h/k^2]").is_err());
        assert!(Expr::parse("1/0").is_err());
        assert!(Expr::parse("[H / k").is_err());
        assert!(Expr::parse("z2 z3").is_err());
    }

    #[test]
    fn exact_point_values() {
        // Σ_{i≤k} H_i^(2)/i = H_k H_k^(2) + H_k^(3) - Σ_{i≤k} H_i/i^2
        let l = Expr::parse("{S(H[2] / k)}").unwrap();
        let r = Expr::parse("{H H[2]} + {H[3]} - {S(H / k^2)}").unwrap();
        let mut c = HarmonicCache::new();
        assert_eq!(l.eval_exact_at(2, &mut c).unwrap(), rat(13, 8));
        for k in 1..=30 {
            assert_eq!(l.eval_exact_at(k, &mut c).unwrap(), r.eval_exact_at(k, &mut c).unwrap());
        }
        assert!(Expr::parse("z2").unwrap().eval_exact_at(1, &mut c).is_err());
    }

    #[test]
    fn sum_products_commute() {
        let a = Expr::parse("2*[H / k^2]*[h / k^2]").unwrap();
        let b = Expr::parse("[h / k^2]*2*[H / k^2]").unwrap();
        assert_eq!(a, b);
        assert_eq!(Expr::parse(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn closed_form_conversion() {
        assert!(Expr::parse("z3 + [H/k^2]").unwrap().closed_form().is_err());
        let cf = Expr::parse("2*z3").unwrap().closed_form().unwrap();
        assert_eq!(Expr::from_closed_form(&cf).to_string(), "2*z3");
    }
}
