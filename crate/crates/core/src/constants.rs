//! Closed-form algebra over the constant basis: atoms, monomials, rational
//! combinations, and their numeric values (including the engine-evaluated
//! odd linear sums and alternating MZVs).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::eval::{evaluate_sum, EvalConfig};
use crate::exact::{rat, Rational};
use crate::hp::{digits_to_bits, ln2_bits, pi_bits, polylog_bits, zeta_bits, HPReal, GUARD_DIGITS};
use crate::summand::SumDescriptor;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MzvTag {
    /// ζ(5̄,1)
    M51,
    /// ζ(5̄,1,1)
    M511,
    /// ζ(3̄,3,1)
    M331,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Ln2,
    Zeta(u32),
    /// Li_s(num/den)
    Li(u32, i64, i64),
    /// Σ h_k / k^m
    OddLinear(u32),
    AltMzv(MzvTag),
    Pi,
}

pub const ATOM_NAMES: &[&str] = &[
    "z2", "z3", "z4", "z5", "z6", "z7", "l2", "li4h", "li5h", "li6h", "li6mh", "li6me", "OL3", "OL5", "mzv51",
    "mzv511", "mzv331", "pi",
];

impl Atom {
    pub fn parse(name: &str) -> Result<Atom, Error> {
        Ok(match name {
            "z2" | "z3" | "z4" | "z5" | "z6" | "z7" => Atom::Zeta(name[1..].parse().unwrap()),
            "l2" => Atom::Ln2,
            "li4h" => Atom::Li(4, 1, 2),
            "li5h" => Atom::Li(5, 1, 2),
            "li6h" => Atom::Li(6, 1, 2),
            "li6mh" => Atom::Li(6, -1, 2),
            "li6me" => Atom::Li(6, -1, 8),
            "OL3" => Atom::OddLinear(3),
            "OL5" => Atom::OddLinear(5),
            "mzv51" => Atom::AltMzv(MzvTag::M51),
            "mzv511" => Atom::AltMzv(MzvTag::M511),
            "mzv331" => Atom::AltMzv(MzvTag::M331),
            "pi" => Atom::Pi,
            _ => return Err(Error::Parse(format!("unknown atom '{name}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Atom::Zeta(n) => ["z2", "z3", "z4", "z5", "z6", "z7"][*n as usize - 2],
            Atom::Ln2 => "l2",
            Atom::Li(4, _, _) => "li4h",
            Atom::Li(5, _, _) => "li5h",
            Atom::Li(6, 1, 2) => "li6h",
            Atom::Li(6, -1, 2) => "li6mh",
            Atom::Li(_, _, _) => "li6me",
            Atom::OddLinear(3) => "OL3",
            Atom::OddLinear(_) => "OL5",
            Atom::AltMzv(MzvTag::M51) => "mzv51",
            Atom::AltMzv(MzvTag::M511) => "mzv511",
            Atom::AltMzv(MzvTag::M331) => "mzv331",
            Atom::Pi => "pi",
        }
    }

    pub fn weight(&self) -> u32 {
        match self {
            Atom::Zeta(n) => *n,
            Atom::Ln2 | Atom::Pi => 1,
            Atom::Li(s, _, _) => *s,
            Atom::OddLinear(m) => m + 1,
            Atom::AltMzv(MzvTag::M51) => 6,
            Atom::AltMzv(_) => 7,
        }
    }

    pub fn all() -> Vec<Atom> {
        ATOM_NAMES.iter().map(|n| Atom::parse(n).unwrap()).collect()
    }

    /// Needs the series engine (not a classical constant).
    pub fn is_engine(&self) -> bool {
        matches!(self, Atom::OddLinear(_) | Atom::AltMzv(_))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Product of atom powers; the empty monomial is 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial(pub BTreeMap<Atom, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(BTreeMap::from([(a, 1)]))
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (a, p) in &o.0 {
            *m.entry(*a).or_insert(0) += p;
        }
        Monomial(m)
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|(a, p)| a.weight() * p).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.keys()
    }

    /// Value and absolute bound.
    pub fn eval(&self, digits: u32, conv: &Conventions) -> Result<(HPReal, HPReal), Error> {
        let prec = digits_to_bits(digits + GUARD_DIGITS);
        let mut v = HPReal::one(prec);
        let mut rel = HPReal::zero(prec);
        for (a, p) in &self.0 {
            let (x, e) = eval_atom(*a, digits, conv)?;
            for _ in 0..*p {
                v = &v * &x;
                if !x.is_zero() {
                    rel += &(&e / &x.abs());
                }
            }
        }
        let bound = &v.abs() * &rel;
        Ok((v, bound))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(a, p)| if *p == 1 { a.to_string() } else { format!("{a}^{p}") })
            .collect();
        f.write_str(&parts.join("*"))
    }
}

/// Descending weight, then atom order: the canonical serialization order.
pub fn canonical_cmp(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    b.weight().cmp(&a.weight()).then_with(|| a.cmp(b))
}

/// Rational linear combination of monomials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosedForm {
    pub terms: BTreeMap<Monomial, Rational>,
}

impl ClosedForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(ts: impl IntoIterator<Item = (Rational, Monomial)>) -> Self {
        let mut cf = Self::zero();
        for (c, m) in ts {
            cf.add_term(c, m);
        }
        cf
    }

    pub fn add_term(&mut self, c: Rational, m: Monomial) {
        let e = self.terms.entry(m.clone()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        crate::expr::Expr::parse(s)?.closed_form()
    }

    pub fn add(&self, o: &ClosedForm) -> ClosedForm {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(c.clone(), m.clone());
        }
        r
    }

    pub fn scale(&self, s: &Rational) -> ClosedForm {
        let mut r = ClosedForm::zero();
        for (m, c) in &self.terms {
            r.add_term(c * s, m.clone());
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order.
    pub fn canonical(&self) -> Vec<(&Monomial, &Rational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| canonical_cmp(a.0, b.0));
        v
    }

    pub fn weights(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.terms.keys().map(|m| m.weight()).collect();
        w.sort();
        w.dedup();
        w
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut v: Vec<Atom> = self.terms.keys().flat_map(|m| m.atoms().copied()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Value and bound; error < (#terms)·10^-digits for classical atoms.
    pub fn eval(&self, digits: u32, conv: &Conventions) -> Result<(HPReal, HPReal), Error> {
        let prec = digits_to_bits(digits + GUARD_DIGITS);
        let mut v = HPReal::zero(prec);
        let mut b = HPReal::zero(prec);
        for (m, c) in &self.terms {
            let (x, e) = m.eval(digits, conv)?;
            v += &x.mul_rational(c);
            b += &e.mul_rational(&c.abs());
        }
        b += &v.abs().mul_pow2(-(prec as i64) + 8).mul_i64(self.terms.len() as i64 + 1);
        Ok((v, b))
    }
}

pub fn fmt_coef(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut out = String::new();
        for (i, (m, c)) in self.canonical().into_iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                out += if neg { "-" } else { "" };
            } else {
                out += if neg { " - " } else { " + " };
            }
            if m.is_one() {
                out += &fmt_coef(&a);
            } else if a.is_one() {
                out += &m.to_string();
            } else {
                out += &format!("{}*{m}", fmt_coef(&a));
            }
        }
        f.write_str(&out)
    }
}

/// Sign convention per alternating MZV: +1 means σ(m) = (-1)^(m+1), -1 means (-1)^m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conventions {
    pub mzv51: i8,
    pub mzv511: i8,
    pub mzv331: i8,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions { mzv51: 1, mzv511: 1, mzv331: 1 }
    }
}

impl Conventions {
    pub fn sign(&self, t: MzvTag) -> i8 {
        match t {
            MzvTag::M51 => self.mzv51,
            MzvTag::M511 => self.mzv511,
            MzvTag::M331 => self.mzv331,
        }
    }

    pub fn describe(&self) -> String {
        let s = |x: i8| if x > 0 { "(-1)^(m+1)" } else { "(-1)^m" };
        format!("mzv51: {}, mzv511: {}, mzv331: {}", s(self.mzv51), s(self.mzv511), s(self.mzv331))
    }
}

/// Series behind an alternating MZV under σ(m) = (-1)^(m+1): (coefficient, summand).
pub fn mzv_series(tag: MzvTag) -> Vec<(Rational, &'static str)> {
    match tag {
        // Σ_{m>n} σ(m)/(m^5 n) = Σ_m σ(m) H_{m-1}/m^5
        MzvTag::M51 => vec![(rat(1, 1), "alt H@k-1 / k^5")],
        // Σ_{n<m} H_{n-1}/n = (H_{m-1}^2 - H_{m-1}^(2))/2
        MzvTag::M511 => vec![(rat(1, 2), "alt H@k-1^2 / k^5"), (rat(-1, 2), "alt H[2]@k-1 / k^5")],
        MzvTag::M331 => vec![(rat(1, 1), "alt S[k-1](H@k-1 / k^3) / k^3")],
    }
}

type AtomKey = (Atom, u32, i8);
type AtomSlot = Arc<OnceLock<Result<(HPReal, HPReal), Error>>>;

fn atom_slots() -> &'static Mutex<HashMap<AtomKey, AtomSlot>> {
    static C: OnceLock<Mutex<HashMap<AtomKey, AtomSlot>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn clear_atom_cache() {
    atom_slots().lock().unwrap().clear();
}

/// Atom value and absolute bound at `digits`; computed once per level.
pub fn eval_atom(a: Atom, digits: u32, conv: &Conventions) -> Result<(HPReal, HPReal), Error> {
    let sign = match a {
        Atom::AltMzv(t) => conv.sign(t),
        _ => 1,
    };
    let slot = atom_slots().lock().unwrap().entry((a, digits, sign)).or_default().clone();
    slot.get_or_init(|| eval_atom_uncached(a, digits, sign)).clone()
}

fn eval_atom_uncached(a: Atom, digits: u32, sign: i8) -> Result<(HPReal, HPReal), Error> {
    let prec = digits_to_bits(digits + GUARD_DIGITS);
    let classical = |v: HPReal| {
        let b = v.abs().mul_pow2(-(prec as i64) + 4) + HPReal::one(prec).mul_pow2(-(prec as i64));
        Ok((v, b))
    };
    match a {
        Atom::Zeta(n) => classical(zeta_bits(n, prec)),
        Atom::Ln2 => classical(ln2_bits(prec)),
        Atom::Pi => classical(pi_bits(prec)),
        Atom::Li(s, n, d) => classical(polylog_bits(s, &rat(n, d), prec)),
        Atom::OddLinear(m) => eval_odd_linear(m, digits),
        Atom::AltMzv(t) => eval_alt_mzv(t, sign, digits),
    }
}

/// Σ_{k≥1} h_k / k^m through the series engine.
pub fn eval_odd_linear(m: u32, digits: u32) -> Result<(HPReal, HPReal), Error> {
    if m < 2 {
        return Err(Error::Domain(format!("Σ h_k/k^{m} diverges")));
    }
    let d = SumDescriptor::parse(&format!("h / k^{m}"))?;
    let r = evaluate_sum(&d, &EvalConfig::with_digits(digits), None)?;
    Ok((r.value, r.bound))
}

/// Alternating MZV under sign convention `sign` (see [`Conventions`]).
pub fn eval_alt_mzv(tag: MzvTag, sign: i8, digits: u32) -> Result<(HPReal, HPReal), Error> {
    let prec = digits_to_bits(digits + GUARD_DIGITS);
    let cfg = EvalConfig::with_digits(digits);
    let mut v = HPReal::zero(prec);
    let mut b = HPReal::zero(prec);
    for (c, s) in mzv_series(tag) {
        let r = evaluate_sum(&SumDescriptor::parse(s)?, &cfg, None)?;
        v += &r.value.mul_rational(&c);
        b += &r.bound.mul_rational(&c.abs());
    }
    if sign < 0 {
        v = -v;
    }
    Ok((v, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_names_round_trip() {
        for n in ATOM_NAMES {
            assert_eq!(Atom::parse(n).unwrap().name(), *n);
        }
        assert!(Atom::parse("z8").is_err());
        assert!(Atom::parse("gamma").is_err());
    }

    #[test]
    fn weights_add() {
        let m = Monomial::atom(Atom::Ln2).mul(&Monomial::atom(Atom::Zeta(3)));
        assert_eq!(m.weight(), 4);
        assert_eq!(Monomial::atom(Atom::OddLinear(3)).weight(), 4);
        assert_eq!(Monomial::atom(Atom::AltMzv(MzvTag::M331)).weight(), 7);
        let sq = Monomial::atom(Atom::Zeta(3)).mul(&Monomial::atom(Atom::Zeta(3)));
        assert_eq!(sq.to_string(), "z3^2");
        assert_eq!(sq.weight(), 6);
    }

    #[test]
    fn empty_form_is_zero() {
        let (v, _) = ClosedForm::zero().eval(30, &Conventions::default()).unwrap();
        assert!(v.is_zero());
        assert_eq!(ClosedForm::zero().to_string(), "0");
    }

    #[test]
    fn product_form_value() {
        let cf = ClosedForm::parse("21/8*z2*z3").unwrap();
        let (v, _) = cf.eval(40, &Conventions::default()).unwrap();
        let p = digits_to_bits(55);
        let want = (&zeta_bits(2, p) * &zeta_bits(3, p)).mul_i64(21).div_i64(8);
        assert!((&v - &want).abs().log10_abs() < -40.0);
    }

    #[test]
    fn canonical_order_by_weight() {
        let cf = ClosedForm::parse("3 + l2*z3 - 2*z5 + 1/2*z2").unwrap();
        assert_eq!(cf.to_string(), "-2*z5 + l2*z3 + 1/2*z2 + 3");
        assert_eq!(ClosedForm::parse(&cf.to_string()).unwrap(), cf);
    }

    #[test]
    fn linearity() {
        let conv = Conventions::default();
        let a = ClosedForm::parse("3/7*z6 - l2*z5 + li6h").unwrap();
        let b = ClosedForm::parse("z3^2 + 5*li6mh").unwrap();
        let s = rat(-2, 3);
        let comb = a.add(&b.scale(&s));
        let (va, _) = a.eval(40, &conv).unwrap();
        let (vb, _) = b.eval(40, &conv).unwrap();
        let (vc, _) = comb.eval(40, &conv).unwrap();
        let d = &vc - &(&va + &vb.mul_rational(&s));
        assert!(d.is_zero() || d.log10_abs() < -37.0);
    }

    #[test]
    fn odd_linear_refines() {
        let (a, _) = eval_odd_linear(3, 30).unwrap();
        let (b, _) = eval_odd_linear(3, 60).unwrap();
        assert!((&a - &b).abs().log10_abs() < -30.0);
    }
}
