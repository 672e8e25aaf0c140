//! Integer relation detection (PSLQ) and closed-form discovery for sums.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::constants::{Atom, ClosedForm, Conventions, Monomial};
use crate::eval::{evaluate_sum, EvalConfig};
use crate::exact::Rational;
use crate::hp::{digits_to_bits, HPReal};
use crate::summand::SumDescriptor;
use crate::Error;

pub const DEFAULT_MAX_HEIGHT: u64 = 1 << 20;
const MAX_ITER: usize = 20_000;

/// Detection digits for a basis of `n` monomials.
pub fn default_digits(n: usize) -> u32 {
    20 + 12 * n as u32
}

#[derive(Clone, Debug, PartialEq)]
pub struct PslqOutcome {
    /// first nonzero entry positive, content 1
    pub relation: Option<Vec<i64>>,
    pub iterations: usize,
    pub note: String,
}

impl PslqOutcome {
    fn none(iterations: usize, note: impl Into<String>) -> Self {
        PslqOutcome { relation: None, iterations, note: note.into() }
    }
}

/// Look for r ≠ 0 with Σ r_i x_i ≈ 0 and max |r_i| ≤ `max_height`, working at
/// `digits` significant digits. The residual test is relative to max |x_i|.
pub fn pslq(x: &[HPReal], digits: u32, max_height: u64) -> Result<PslqOutcome, Error> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Arity(format!("pslq needs at least 2 values, got {n}")));
    }
    if x.iter().any(|v| v.is_zero()) {
        return Err(Error::Domain("pslq input contains a zero".into()));
    }
    if digits < 10 {
        return Err(Error::Domain(format!("pslq at {digits} digits")));
    }
    let prec = digits_to_bits(digits);
    let x: Vec<HPReal> = x.iter().map(|v| v.with_prec(prec)).collect();
    let tol = HPReal::parse(&format!("1e-{}", digits - digits / 5), prec)?;
    let height = HPReal::from_i64(max_height.min(i64::MAX as u64) as i64, prec);
    let gamma = HPReal::from_rational(&Rational::new(4.into(), 3.into()), prec).sqrt()?;

    // s_k = sqrt(Σ_{j≥k} x_j²), normalised by s_0
    let mut s = vec![HPReal::zero(prec); n];
    let mut acc = HPReal::zero(prec);
    for k in (0..n).rev() {
        acc += &(&x[k] * &x[k]);
        s[k] = acc.sqrt()?;
    }
    let t = s[0].clone();
    let mut y: Vec<HPReal> = x.iter().map(|v| v / &t).collect();
    for v in s.iter_mut() {
        *v = &*v / &t;
    }
    let mut a: Vec<Vec<BigInt>> = identity(n);
    let mut b: Vec<Vec<BigInt>> = identity(n);
    let mut h = vec![vec![HPReal::zero(prec); n - 1]; n];
    for i in 0..n {
        for j in 0..(n - 1).min(i + 1) {
            h[i][j] = if i == j {
                &s[i + 1] / &s[i]
            } else {
                -&(&(&y[i] * &y[j]) / &(&s[j] * &s[j + 1]))
            };
        }
    }
    for i in 1..n {
        for j in (0..i.min(n - 1)).rev() {
            reduce(i, j, &mut h, &mut y, &mut a, &mut b, prec);
        }
    }
    for iter in 1..=MAX_ITER {
        // exchange step
        let mut m = 0;
        let mut best = HPReal::zero(prec);
        let mut g = gamma.clone();
        for i in 0..n - 1 {
            let v = (&g * &h[i][i]).abs();
            if v.cmp_value(&best).is_gt() {
                best = v;
                m = i;
            }
            g = &g * &gamma;
        }
        y.swap(m, m + 1);
        a.swap(m, m + 1);
        h.swap(m, m + 1);
        for row in b.iter_mut() {
            row.swap(m, m + 1);
        }
        if m + 2 < n {
            let t0 = (&(&h[m][m] * &h[m][m]) + &(&h[m][m + 1] * &h[m][m + 1])).sqrt()?;
            if t0.is_zero() {
                return Ok(PslqOutcome::none(iter, "precision exhausted (degenerate rotation)"));
            }
            let t1 = &h[m][m] / &t0;
            let t2 = &h[m][m + 1] / &t0;
            for row in h.iter_mut().skip(m) {
                let (t3, t4) = (row[m].clone(), row[m + 1].clone());
                row[m] = &(&t1 * &t3) + &(&t2 * &t4);
                row[m + 1] = &(&t1 * &t4) - &(&t2 * &t3);
            }
        }
        for i in m + 1..n {
            for j in (0..=(i - 1).min(m + 1).min(n - 2)).rev() {
                reduce(i, j, &mut h, &mut y, &mut a, &mut b, prec);
            }
        }
        // a small y_j means column j of B is a relation
        let mut found: Option<Vec<BigInt>> = None;
        for j in 0..n {
            if y[j].abs().cmp_value(&tol).is_lt() {
                let col: Vec<BigInt> = b.iter().map(|row| row[j].clone()).collect();
                if col.iter().all(|c| c.abs() <= BigInt::from(max_height)) && col.iter().any(|c| !c.is_zero()) {
                    let better = match &found {
                        None => true,
                        Some(f) => norm(&col) < norm(f),
                    };
                    if better {
                        found = Some(col);
                    }
                }
            }
        }
        if let Some(r) = found {
            return Ok(PslqOutcome { relation: Some(normalize(r)), iterations: iter, note: String::new() });
        }
        // any relation has norm ≥ 1 / max |H_jj|
        let mut hmax = HPReal::zero(prec);
        for (j, row) in h.iter().enumerate().take(n - 1) {
            let v = row[j].abs();
            if v.cmp_value(&hmax).is_gt() {
                hmax = v;
            }
        }
        if hmax.is_zero() {
            return Ok(PslqOutcome::none(iter, "precision exhausted (H collapsed)"));
        }
        if hmax.recip().cmp_value(&height).is_gt() {
            return Ok(PslqOutcome::none(iter, format!("no relation of height <= {max_height}")));
        }
        if a.iter().flatten().any(|v| v.bits() as u32 > prec) {
            return Ok(PslqOutcome::none(iter, "precision exhausted (entries outgrew working precision)"));
        }
    }
    Ok(PslqOutcome::none(MAX_ITER, "iteration limit reached"))
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n).map(|i| (0..n).map(|j| BigInt::from((i == j) as i32)).collect()).collect()
}

fn norm(v: &[BigInt]) -> BigInt {
    v.iter().map(|c| c * c).sum()
}

fn normalize(mut r: Vec<BigInt>) -> Vec<i64> {
    let g = r.iter().fold(BigInt::zero(), |g, c| g.gcd(c));
    if !g.is_zero() {
        for c in r.iter_mut() {
            *c = &*c / &g;
        }
    }
    if r.iter().find(|c| !c.is_zero()).is_some_and(|c| c.is_negative()) {
        for c in r.iter_mut() {
            *c = -&*c;
        }
    }
    r.iter().map(|c| c.to_i64().expect("height checked")).collect()
}

// Size-reduce row i against row j.
fn reduce(
    i: usize,
    j: usize,
    h: &mut [Vec<HPReal>],
    y: &mut [HPReal],
    a: &mut [Vec<BigInt>],
    b: &mut [Vec<BigInt>],
    prec: u32,
) {
    if h[j][j].is_zero() {
        return;
    }
    let t = (&h[i][j] / &h[j][j]).round_to_bigint();
    if t.is_zero() {
        return;
    }
    let tr = HPReal::from_bigint(t.clone(), prec);
    let yi = y[i].clone();
    y[j] += &(&tr * &yi);
    for k in 0..=j {
        let v = &tr * &h[j][k];
        h[i][k] -= &v;
    }
    let n = a.len();
    for k in 0..n {
        let v = &t * &a[j][k];
        a[i][k] -= v;
        let w = &t * &b[k][i];
        b[k][j] += w;
    }
}

/// All monomials of total weight `w` over `atoms`.
pub fn weight_basis(w: u32, atoms: &[Atom]) -> Vec<Monomial> {
    let mut atoms: Vec<Atom> = atoms.iter().copied().filter(|a| a.weight() > 0).collect();
    atoms.sort();
    atoms.dedup();
    let mut out = Vec::new();
    fn go(i: usize, left: u32, cur: Monomial, atoms: &[Atom], out: &mut Vec<Monomial>) {
        if left == 0 {
            out.push(cur);
            return;
        }
        if i == atoms.len() {
            return;
        }
        go(i + 1, left, cur.clone(), atoms, out);
        let mut m = cur;
        let mut used = 0;
        while used + atoms[i].weight() <= left {
            used += atoms[i].weight();
            m = m.mul(&Monomial::atom(atoms[i]));
            go(i + 1, left - used, m.clone(), atoms, out);
        }
    }
    go(0, w, Monomial::one(), &atoms, &mut out);
    out.sort_by(crate::constants::canonical_cmp);
    out
}

/// Weight-`w` zeta products with at most one even zeta: even powers of π are
/// already rational multiples of ζ(2j), so this set has no built-in relations.
pub fn zeta_basis(w: u32) -> Vec<Monomial> {
    let atoms: Vec<Atom> = (2..=7).map(Atom::Zeta).collect();
    weight_basis(w, &atoms)
        .into_iter()
        .filter(|m| m.0.iter().filter(|(a, _)| matches!(a, Atom::Zeta(n) if n % 2 == 0)).map(|(_, p)| p).sum::<u32>() <= 1)
        .collect()
}

#[derive(Clone, Debug)]
pub struct DiscoverConfig {
    /// K, B for the sum; digits are set from `digits`
    pub eval: EvalConfig,
    /// detection digits; default 20 + 12 per basis element
    pub digits: Option<u32>,
    pub max_height: u64,
    pub conv: Conventions,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        DiscoverConfig { eval: EvalConfig::default(), digits: None, max_height: DEFAULT_MAX_HEIGHT, conv: Conventions::default() }
    }
}

/// Express Σ d(k) as a rational combination of `basis`.
pub fn discover(d: &SumDescriptor, basis: &[Monomial], cfg: &DiscoverConfig) -> Result<ClosedForm, Error> {
    if basis.is_empty() {
        return Err(Error::Arity("empty basis".into()));
    }
    let digits = cfg.digits.unwrap_or(default_digits(basis.len()));
    let ecfg = EvalConfig { digits, ..cfg.eval.clone() };
    let sum = evaluate_sum(d, &ecfg, None)?;
    let prec = ecfg.prec();
    let mut x = vec![sum.value.clone()];
    for m in basis {
        x.push(m.eval(digits, &cfg.conv)?.0);
    }
    if sum.value.is_zero() {
        return Ok(ClosedForm::zero());
    }
    let out = pslq(&x, digits, cfg.max_height)?;
    let r = out.relation.ok_or_else(|| Error::NoRelation(format!("{d}: {}", out.note)))?;
    if r[0] == 0 {
        return Err(Error::NoRelation(format!("{d}: relation among the basis only {r:?}")));
    }
    let mut cf = ClosedForm::zero();
    for (c, m) in r[1..].iter().zip(basis) {
        cf.add_term(Rational::new((-c).into(), r[0].into()), m.clone());
    }
    let (v, vb) = cf.eval(digits, &cfg.conv)?;
    let slack = HPReal::parse(&format!("1e-{}", digits - digits / 5), prec)?;
    let lim = &(&sum.bound + &vb) + &(&slack * &sum.value.abs());
    if (&v - &sum.value).abs().cmp_value(&lim).is_gt() {
        return Err(Error::NoRelation(format!("{d}: relation {r:?} fails the residual check")));
    }
    Ok(cf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::zeta_int;

    fn z(s: u32, d: u32) -> HPReal {
        zeta_int(s, d).unwrap()
    }

    #[test]
    fn trivial_dependency() {
        let x = [z(3, 40).mul_i64(2), z(3, 40)];
        assert_eq!(pslq(&x, 40, DEFAULT_MAX_HEIGHT).unwrap().relation, Some(vec![1, -2]));
    }

    #[test]
    fn negative_control() {
        let out = pslq(&[z(2, 50), z(3, 50)], 50, 1_000_000).unwrap();
        assert_eq!(out.relation, None, "{out:?}");
        assert!(!out.note.is_empty());
    }

    #[test]
    fn scale_invariance() {
        let x = [z(5, 60), &z(2, 60) * &z(3, 60), z(3, 60)];
        let rel = |x: &[HPReal]| pslq(x, 60, DEFAULT_MAX_HEIGHT).unwrap().relation;
        let y = [z(5, 60).mul_i64(3), (&z(2, 60) * &z(3, 60)).mul_i64(5), z(3, 60).mul_i64(7)];
        let sum = &y[0].mul_i64(2) - &y[1].mul_i64(3);
        let x2 = [sum.clone(), y[0].clone(), y[1].clone()];
        let r = rel(&x2).unwrap();
        assert_eq!(r, vec![1, -2, 3]);
        let c = Rational::new(17.into(), 5.into());
        let scaled: Vec<HPReal> = x2.iter().map(|v| v.mul_rational(&c)).collect();
        assert_eq!(rel(&scaled).unwrap(), r);
        assert_eq!(rel(&x), None);
    }

    #[test]
    fn input_checks() {
        assert!(pslq(&[z(3, 30)], 30, 100).is_err());
        assert!(pslq(&[z(3, 30), HPReal::zero(100)], 30, 100).is_err());
    }

    #[test]
    fn bases() {
        let names = |v: Vec<Monomial>| v.iter().map(|m| m.to_string()).collect::<Vec<_>>();
        assert_eq!(names(zeta_basis(5)).len(), 2);
        assert_eq!(zeta_basis(6).len(), 2);
        assert_eq!(zeta_basis(7).len(), 3);
        assert_eq!(zeta_basis(4).len(), 1);
        let all: Vec<Atom> = (2..=7).map(Atom::Zeta).collect();
        // z6, z2 z4, z3^2, z2^3
        assert_eq!(weight_basis(6, &all).len(), 4);
        assert!(weight_basis(6, &all).iter().all(|m| m.weight() == 6));
    }

    #[test]
    fn euler_value() {
        let d = SumDescriptor::parse("H / k^2").unwrap();
        let cfg = DiscoverConfig { eval: EvalConfig { k: 1000, ..EvalConfig::default() }, ..Default::default() };
        let cf = discover(&d, &zeta_basis(3), &cfg).unwrap();
        assert_eq!(cf, ClosedForm::parse("2*z3").unwrap());
    }
}
