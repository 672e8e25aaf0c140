//! Asymptotic expansions in span{(ln k)^a k^-b} and certified Euler–Maclaurin
//! tails Σ_{k>K} (ln k)^a / k^b.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::exact::{bernoulli, rint, HarmKind, Rational};
use crate::hp::{gamma_bits, ln2_bits, zeta_bits, HPReal};
use crate::summand::{Base, Limit, SumDescriptor};
use crate::Error;

/// Orders kept beyond the nominal truncation; their size is the truncation estimate.
pub const EXTRA: u32 = 4;
/// Bernoulli correction terms used by the tail formula.
pub const EM_TERMS: u32 = 12;
/// Smallest cutoff at which the Bernoulli corrections are trusted.
pub const MIN_CUTOFF: u64 = 8;

/// Numeric constants an expansion may contain; γ is swappable so callers can
/// check that it cancels.
#[derive(Clone, Debug)]
pub struct AsymContext {
    pub prec: u32,
    pub order: u32,
    pub gamma: HPReal,
    pub ln2: HPReal,
}

impl AsymContext {
    pub fn new(prec: u32, order: u32) -> Self {
        AsymContext { prec, order, gamma: gamma_bits(prec), ln2: ln2_bits(prec) }
    }

    pub fn with_gamma(mut self, gamma: HPReal) -> Self {
        self.gamma = gamma;
        self
    }

    fn zeta(&self, n: u32) -> HPReal {
        zeta_bits(n, self.prec)
    }

    fn ln_of(&self, c: i64) -> HPReal {
        match c {
            1 => HPReal::zero(self.prec),
            2 => self.ln2.clone(),
            _ => HPReal::from_i64(c, self.prec).ln().unwrap(),
        }
    }
}

/// Finite map (a, b) -> coefficient of (ln k)^a k^-b.
#[derive(Clone, Debug)]
pub struct Expansion {
    c: Vec<Vec<HPReal>>,
    order: u32,
    prec: u32,
    /// additive constant still to be fixed by bootstrap
    pub constant_pending: bool,
}

impl Expansion {
    pub fn zero(order: u32, prec: u32) -> Self {
        Expansion { c: vec![Vec::new(); (order + EXTRA + 1) as usize], order, prec, constant_pending: false }
    }

    pub fn constant(v: &HPReal, order: u32, prec: u32) -> Self {
        let mut e = Self::zero(order, prec);
        e.add_at(0, 0, v);
        e
    }

    pub fn one(order: u32, prec: u32) -> Self {
        Self::constant(&HPReal::one(prec), order, prec)
    }

    pub fn monomial(a: u32, b: u32, coef: &HPReal, order: u32, prec: u32) -> Self {
        let mut e = Self::zero(order, prec);
        e.add_at(a, b, coef);
        e
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Highest stored k-exponent.
    pub fn top(&self) -> u32 {
        self.order + EXTRA
    }

    pub fn coef(&self, a: u32, b: u32) -> HPReal {
        self.c
            .get(b as usize)
            .and_then(|v| v.get(a as usize))
            .cloned()
            .unwrap_or_else(|| HPReal::zero(self.prec))
    }

    pub fn add_at(&mut self, a: u32, b: u32, v: &HPReal) {
        if b > self.top() || v.is_zero() {
            return;
        }
        let row = &mut self.c[b as usize];
        if row.len() <= a as usize {
            row.resize(a as usize + 1, HPReal::zero(self.prec));
        }
        row[a as usize] += v;
    }

    /// Nonzero monomials as (a, b, coef).
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &HPReal)> {
        self.c.iter().enumerate().flat_map(|(b, row)| {
            row.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(move |(a, v)| (a as u32, b as u32, v))
        })
    }

    pub fn len(&self) -> usize {
        self.terms().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_log_power(&self) -> u32 {
        self.terms().map(|(a, _, _)| a).max().unwrap_or(0)
    }

    pub fn add(&self, o: &Expansion) -> Expansion {
        let mut r = self.retruncate(self.order.min(o.order));
        for (a, b, v) in o.terms() {
            r.add_at(a, b, v);
        }
        r.constant_pending = self.constant_pending || o.constant_pending;
        r
    }

    pub fn sub(&self, o: &Expansion) -> Expansion {
        self.add(&o.scale(&HPReal::from_i64(-1, self.prec)))
    }

    pub fn scale(&self, s: &HPReal) -> Expansion {
        let mut r = Expansion::zero(self.order, self.prec);
        for (a, b, v) in self.terms() {
            r.add_at(a, b, &(v * s));
        }
        r.constant_pending = self.constant_pending;
        r
    }

    fn retruncate(&self, order: u32) -> Expansion {
        let mut r = Expansion::zero(order, self.prec);
        for (a, b, v) in self.terms() {
            r.add_at(a, b, v);
        }
        r.constant_pending = self.constant_pending;
        r
    }

    /// Product truncated at the smaller order.
    pub fn mul(&self, o: &Expansion) -> Expansion {
        let order = self.order.min(o.order);
        let mut r = Expansion::zero(order, self.prec.min(o.prec));
        let top = r.top() as usize;
        for (b1, row1) in self.c.iter().enumerate() {
            if b1 > top {
                break;
            }
            for (b2, row2) in o.c.iter().enumerate() {
                if b1 + b2 > top {
                    break;
                }
                for (a1, v1) in row1.iter().enumerate() {
                    if v1.is_zero() {
                        continue;
                    }
                    for (a2, v2) in row2.iter().enumerate() {
                        if v2.is_zero() {
                            continue;
                        }
                        r.add_at((a1 + a2) as u32, (b1 + b2) as u32, &(v1 * v2));
                    }
                }
            }
        }
        r.constant_pending = self.constant_pending || o.constant_pending;
        r
    }

    pub fn pow(&self, n: u32) -> Expansion {
        let mut r = Expansion::one(self.order, self.prec);
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// Re-expand f(c*j + s) in powers of j.
    pub fn compose_affine(&self, c: i64, s: i64, ctx: &AsymContext) -> Expansion {
        assert!(c >= 1);
        let (order, prec) = (self.order, self.prec);
        let top = self.top();
        if c == 1 && s == 0 {
            return self.clone();
        }
        let q = Rational::new(BigInt::from(s), BigInt::from(c));
        // L = ln j + ln c + ln(1 + q/j)
        let mut l = Expansion::zero(order, prec);
        l.add_at(1, 0, &HPReal::one(prec));
        l.add_at(0, 0, &ctx.ln_of(c));
        let mut qm = Rational::one();
        for m in 1..=top {
            qm *= &q;
            let mut t = &qm / rint(m as i64);
            if m % 2 == 0 {
                t = -t;
            }
            l.add_at(0, m, &HPReal::from_rational(&t, prec));
        }
        let max_a = self.max_log_power();
        let mut out = Expansion::zero(order, prec);
        let mut lpow = Expansion::one(order, prec);
        for a in 0..=max_a {
            // Q_a = Σ_b coef(a,b) (c j + s)^-b
            let mut qa = Expansion::zero(order, prec);
            for b in 0..=top {
                let v = self.coef(a, b);
                if v.is_zero() {
                    continue;
                }
                let rb = reciprocal_affine(&rint(c), &rint(s), b, order, prec);
                for (_, bb, w) in rb.terms() {
                    qa.add_at(0, bb, &(&v * w));
                }
            }
            if !qa.is_empty() {
                out = out.add(&lpow.mul(&qa));
            }
            if a < max_a {
                lpow = lpow.mul(&l);
            }
        }
        out.constant_pending = self.constant_pending;
        out
    }

    /// Value at integer k and the size of the beyond-order part.
    pub fn eval_at(&self, k: u64) -> (HPReal, HPReal) {
        let prec = self.prec;
        let kk = HPReal::from_i64(k as i64, prec);
        let lnk = kk.ln().unwrap();
        let kinv = kk.recip();
        let mut val = HPReal::zero(prec);
        let mut extra = HPReal::zero(prec);
        let mut kp = HPReal::one(prec);
        for (b, row) in self.c.iter().enumerate() {
            let mut lp = kp.clone();
            for v in row.iter() {
                if !v.is_zero() {
                    let t = v * &lp;
                    if b as u32 > self.order {
                        extra += &t.abs();
                    }
                    val += &t;
                }
                lp = &lp * &lnk;
            }
            kp = &kp * &kinv;
        }
        (val, extra)
    }
}

/// (α k + β)^-m expanded in k.
pub fn reciprocal_affine(alpha: &Rational, beta: &Rational, m: u32, order: u32, prec: u32) -> Expansion {
    let mut e = Expansion::zero(order, prec);
    if m == 0 {
        e.add_at(0, 0, &HPReal::one(prec));
        return e;
    }
    let top = order + EXTRA;
    // α^-m k^-m Σ_j C(m+j-1, j) (-β/α)^j k^-j
    let r = -(beta / alpha);
    let lead = Rational::one() / pow_r(alpha, m);
    let mut binom = Rational::one();
    let mut rp = Rational::one();
    let mut j = 0u32;
    while m + j <= top {
        let coef = &lead * &binom * &rp;
        e.add_at(0, m + j, &HPReal::from_rational(&coef, prec));
        binom = binom * rint((m + j) as i64) / rint(j as i64 + 1);
        rp *= &r;
        j += 1;
    }
    e
}

/// Expansion of 1/base^m for one of the summand bases at parameter p.
pub fn reciprocal_base(base: Base, m: u32, p: i64, order: u32, prec: u32) -> Expansion {
    let (a, b) = base.affine(p);
    reciprocal_affine(&rint(a), &rint(b), m, order, prec)
}

fn pow_r(x: &Rational, n: u32) -> Rational {
    let mut r = Rational::one();
    for _ in 0..n {
        r *= x;
    }
    r
}

/// Asymptotic expansion of H_k^(n) (Full) or h_k^(n) (Odd). For Alt the
/// result is a_{2m}^(n) = h_m^(n) - 2^-n H_m^(n) as a function of m, since
/// a_k itself has no smooth expansion in k.
pub fn expand_symbol(kind: HarmKind, n: u32, ctx: &AsymContext) -> Expansion {
    let prec = ctx.prec;
    let full = expand_full(n, ctx);
    let half = || full.scale(&HPReal::one(prec).mul_pow2(-(n as i64)));
    match kind {
        HarmKind::Full => full,
        HarmKind::Odd => {
            // h_k^(n) = H_{2k}^(n) - 2^-n H_k^(n)
            full.compose_affine(2, 0, ctx).sub(&half())
        }
        HarmKind::Alt => {
            // a_{2m} = H_{2m} - 2^(1-n) H_m
            let h = full.compose_affine(2, 0, ctx).sub(&half());
            h.sub(&half())
        }
    }
}

fn expand_full(n: u32, ctx: &AsymContext) -> Expansion {
    let (order, prec) = (ctx.order, ctx.prec);
    let top = order + EXTRA;
    let mut e = Expansion::zero(order, prec);
    let hp = |r: &Rational| HPReal::from_rational(r, prec);
    if n == 1 {
        e.add_at(1, 0, &HPReal::one(prec));
        e.add_at(0, 0, &ctx.gamma);
        e.add_at(0, 1, &hp(&Rational::new(1.into(), 2.into())));
        let mut j = 1;
        while 2 * j <= top {
            let c = -bernoulli(2 * j) / rint(2 * j as i64);
            e.add_at(0, 2 * j, &hp(&c));
            j += 1;
        }
    } else {
        e.add_at(0, 0, &ctx.zeta(n));
        e.add_at(0, n - 1, &hp(&-(Rational::one() / rint(n as i64 - 1))));
        e.add_at(0, n, &hp(&Rational::new(1.into(), 2.into())));
        // - Σ_j B_2j (n)_{2j-1} / (2j)! k^{-n-2j+1}
        let mut rising = rint(n as i64);
        let mut fact = rint(2);
        let mut j = 1u32;
        while n + 2 * j - 1 <= top {
            let c = -(bernoulli(2 * j) * &rising / &fact);
            e.add_at(0, n + 2 * j - 1, &hp(&c));
            let a = (n + 2 * j - 1) as i64;
            rising *= rint(a * (a + 1));
            fact *= rint((2 * j as i64 + 1) * (2 * j as i64 + 2));
            j += 1;
        }
    }
    e
}

/// Integer derivative tables: f^(m) of (ln x)^a x^-b = Σ_i d[m][i] (ln x)^i x^{-b-m}.
fn derivatives(a: u32, b: u32, max_m: u32) -> Vec<Vec<BigInt>> {
    static C: OnceLock<Mutex<HashMap<(u32, u32), Vec<Vec<BigInt>>>>> = OnceLock::new();
    let cache = C.get_or_init(|| Mutex::new(HashMap::new()));
    {
        let g = cache.lock().unwrap();
        if let Some(v) = g.get(&(a, b)) {
            if v.len() > max_m as usize {
                return v.clone();
            }
        }
    }
    let mut out = Vec::with_capacity(max_m as usize + 1);
    let mut cur: Vec<BigInt> = vec![BigInt::zero(); a as usize + 1];
    cur[a as usize] = BigInt::one();
    out.push(cur.clone());
    for m in 0..max_m {
        let c = BigInt::from(b + m);
        let mut next = vec![BigInt::zero(); a as usize + 1];
        for i in 0..=a as usize {
            // d/dx (ln x)^i x^-c = i (ln x)^{i-1} x^{-c-1} - c (ln x)^i x^{-c-1}
            if !cur[i].is_zero() {
                next[i] -= &cur[i] * &c;
                if i > 0 {
                    next[i - 1] += &cur[i] * BigInt::from(i);
                }
            }
        }
        cur = next;
        out.push(cur.clone());
    }
    cache.lock().unwrap().insert((a, b), out.clone());
    out
}

fn factorial(n: u32) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, x| acc * BigInt::from(x))
}

/// Exact rational expansion of Σ_{i≤k} (ln i)^a i^-b minus its constant.
fn partial_sum_monomial(a: u32, b: u32, top: u32) -> Result<Vec<(u32, u32, Rational)>, Error> {
    if b == 0 {
        return Err(Error::Divergent("inner summand does not decay".into()));
    }
    let mut out = Vec::new();
    if b == 1 {
        out.push((a + 1, 0, Rational::one() / rint(a as i64 + 1)));
    } else {
        // -∫_k^∞ (ln x)^a x^-b dx
        let af = factorial(a);
        for i in 0..=a {
            let c = Rational::new(af.clone(), factorial(a - i)) / pow_r(&rint(b as i64 - 1), i + 1);
            out.push((a - i, b - 1, -c));
        }
    }
    out.push((a, b, Rational::new(1.into(), 2.into())));
    let mut j = 1u32;
    while b + 2 * j - 1 <= top {
        let d = derivatives(a, b, 2 * j - 1);
        let w = bernoulli(2 * j) / Rational::from_integer(factorial(2 * j));
        for (i, c) in d[(2 * j - 1) as usize].iter().enumerate() {
            if !c.is_zero() {
                out.push((i as u32, b + 2 * j - 1, &w * Rational::from_integer(c.clone())));
            }
        }
        j += 1;
    }
    Ok(out)
}

/// Expansion of the partial sums Σ_{i≤k} g(i), without the additive constant.
pub fn partial_sum_expansion(g: &Expansion) -> Result<Expansion, Error> {
    let mut r = Expansion::zero(g.order, g.prec);
    let top = g.top();
    let mut hp_cache: HashMap<(u32, u32), Vec<(u32, u32, HPReal)>> = HashMap::new();
    for (a, b, v) in g.terms() {
        let ps = match hp_cache.get(&(a, b)) {
            Some(x) => x.clone(),
            None => {
                let x: Vec<(u32, u32, HPReal)> = partial_sum_monomial(a, b, top)?
                    .into_iter()
                    .map(|(aa, bb, c)| (aa, bb, HPReal::from_rational(&c, g.prec)))
                    .collect();
                hp_cache.insert((a, b), x.clone());
                x
            }
        };
        for (aa, bb, c) in ps {
            r.add_at(aa, bb, &(v * &c));
        }
    }
    r.constant_pending = true;
    Ok(r)
}

/// Precomputed powers at one cutoff, reused across monomials.
pub struct TailTable {
    pub cutoff: u64,
    prec: u32,
    lnk: Vec<HPReal>,
    kinv: Vec<HPReal>,
    memo: HashMap<(u32, u32), (HPReal, HPReal)>,
}

impl TailTable {
    pub fn new(cutoff: u64, prec: u32) -> Result<Self, Error> {
        if cutoff < MIN_CUTOFF {
            return Err(Error::Domain(format!("tail cutoff {cutoff} below {MIN_CUTOFF}")));
        }
        let k = HPReal::from_i64(cutoff as i64, prec);
        let lnk = vec![HPReal::one(prec), k.ln()?];
        let kinv = vec![HPReal::one(prec), k.recip()];
        Ok(TailTable { cutoff, prec, lnk, kinv, memo: HashMap::new() })
    }

    fn lnk_pow(&mut self, i: usize) -> HPReal {
        while self.lnk.len() <= i {
            let n = &self.lnk[self.lnk.len() - 1] * &self.lnk[1];
            self.lnk.push(n);
        }
        self.lnk[i].clone()
    }

    fn kinv_pow(&mut self, i: usize) -> HPReal {
        while self.kinv.len() <= i {
            let n = &self.kinv[self.kinv.len() - 1] * &self.kinv[1];
            self.kinv.push(n);
        }
        self.kinv[i].clone()
    }

    // Σ_i d[i] (ln K)^i K^-e
    fn logpoly(&mut self, d: &[BigInt], e: u32) -> HPReal {
        let mut acc = HPReal::zero(self.prec);
        for (i, c) in d.iter().enumerate() {
            if !c.is_zero() {
                acc += &self.lnk_pow(i).mul_rational(&Rational::from_integer(c.clone()));
            }
        }
        &acc * &self.kinv_pow(e as usize)
    }

    /// T(a, b, K) and its first-omitted-term error bound.
    pub fn tail(&mut self, a: u32, b: u32) -> Result<(HPReal, HPReal), Error> {
        if b < 2 {
            return Err(Error::Divergent(format!("Σ (ln k)^{a} / k^{b} diverges")));
        }
        if let Some(v) = self.memo.get(&(a, b)) {
            return Ok(v.clone());
        }
        let prec = self.prec;
        // ∫_K^∞ (ln x)^a x^-b dx
        let mut integral = HPReal::zero(prec);
        let af = factorial(a);
        for i in 0..=a {
            let c = Rational::new(af.clone(), factorial(a - i)) / pow_r(&rint(b as i64 - 1), i + 1);
            integral += &self.lnk_pow((a - i) as usize).mul_rational(&c);
        }
        let integral = &integral * &self.kinv_pow((b - 1) as usize);
        let d = derivatives(a, b, 2 * EM_TERMS + 1);
        let f0 = self.logpoly(&d[0], b);
        let mut val = integral - f0.mul_pow2(-1);
        for j in 1..=EM_TERMS {
            let m = 2 * j - 1;
            let w = bernoulli(2 * j) / Rational::from_integer(factorial(2 * j));
            let t = self.logpoly(&d[m as usize], b + m).mul_rational(&w);
            val -= &t;
        }
        let m = 2 * EM_TERMS + 1;
        let w = bernoulli(2 * EM_TERMS + 2) / Rational::from_integer(factorial(2 * EM_TERMS + 2));
        let err = self.logpoly(&d[m as usize], b + m).mul_rational(&w).abs().mul_pow2(1);
        self.memo.insert((a, b), (val.clone(), err.clone()));
        Ok((val, err))
    }
}

/// T(a, b, K) = Σ_{k>K} (ln k)^a / k^b to absolute error < 10^-digits.
pub fn log_zeta_tail(a: u32, b: u32, cutoff: u64, digits: u32) -> Result<(HPReal, HPReal), Error> {
    let prec = crate::hp::digits_to_bits(digits + crate::hp::GUARD_DIGITS);
    let mut t = TailTable::new(cutoff, prec)?;
    let (v, e) = t.tail(a, b)?;
    let lim = HPReal::parse(&format!("1e-{digits}"), prec)?;
    if e.cmp_value(&lim) == std::cmp::Ordering::Greater {
        return Err(Error::Shortfall(format!(
            "tail bound {} exceeds 1e-{digits} at K = {cutoff}",
            e.to_sci(3)
        )));
    }
    Ok((v, e))
}

/// Σ_{k>K} e(k): value and bound (E–M error + beyond-order size).
pub fn tail_sum(e: &Expansion, table: &mut TailTable) -> Result<(HPReal, HPReal), Error> {
    let prec = e.prec;
    let scale = e.terms().map(|(_, _, v)| v.abs()).fold(HPReal::zero(prec), |m, v| {
        if v.cmp_value(&m) == std::cmp::Ordering::Greater {
            v
        } else {
            m
        }
    });
    // residue of exact cancellations is allowed to be rounding noise only
    let noise = scale.mul_pow2(-(prec as i64) + 24);
    let mut val = HPReal::zero(prec);
    let mut bound = HPReal::zero(prec);
    for (a, b, v) in e.terms() {
        if b < 2 {
            if v.abs().cmp_value(&noise) == std::cmp::Ordering::Greater {
                return Err(Error::Divergent(format!(
                    "non-summable monomial (ln k)^{a} k^-{b} with coefficient {}",
                    v.to_sci(6)
                )));
            }
            continue;
        }
        let (t, et) = table.tail(a, b)?;
        let c = v * &t;
        val += &c;
        bound += &(v.abs() * et);
        if b > e.order {
            bound += &c.abs();
        }
    }
    // per-operation rounding
    let ulp = HPReal::one(prec).mul_pow2(-(prec as i64) + 8).mul_i64(e.len() as i64 + 1);
    bound += &(&ulp * &HPReal::max_abs(&val, &HPReal::one(prec)).abs());
    Ok((val, bound))
}

/// Additive constant C of a partial-sum expansion: S_K - e(K) at two anchors.
/// With `strict`, anchors that disagree beyond the truncation bound are an error.
pub fn bootstrap_constant(
    s_k1: &HPReal,
    k1: u64,
    s_k2: &HPReal,
    k2: u64,
    e: &Expansion,
    strict: bool,
) -> Result<(HPReal, HPReal), Error> {
    if k2 < 2 * k1 {
        return Err(Error::Domain(format!("anchors need K2 >= 2 K1, got {k1}, {k2}")));
    }
    let (v1, x1) = e.eval_at(k1);
    let (v2, x2) = e.eval_at(k2);
    let c1 = s_k1 - &v1;
    let c2 = s_k2 - &v2;
    let prec = e.prec;
    let round = HPReal::one(prec).mul_pow2(-(prec as i64) + 16).mul_i64((k2 + 1) as i64);
    let tol1 = &(&x1 + &x2) + &round;
    let diff = (&c1 - &c2).abs();
    // the low anchor carries the larger truncation error; allow it fully
    if strict && diff.cmp_value(&tol1.mul_i64(4)) == std::cmp::Ordering::Greater {
        return Err(Error::InsufficientOrder(format!(
            "bootstrap anchors disagree by {} (allowed {})",
            diff.to_sci(3),
            tol1.mul_i64(4).to_sci(3)
        )));
    }
    Ok((c2, x2 + round))
}

/// Context needed to expand summands: parameter value and bootstrap constants
/// for the inner sum.
pub struct SummandExpansion<'a> {
    pub ctx: &'a AsymContext,
    pub p: i64,
}

impl SummandExpansion<'_> {
    /// Expansion of the summand without alternation; the inner sum's expansion
    /// (already including its constant) is passed in.
    pub fn smooth(&self, d: &SumDescriptor, inner: Option<&Expansion>) -> Result<Expansion, Error> {
        let ctx = self.ctx;
        let (order, prec) = (ctx.order, ctx.prec);
        let mut e = Expansion::one(order, prec);
        let mut sym_cache: HashMap<(HarmKind, u32, bool), Expansion> = HashMap::new();
        for f in &d.factors {
            let key = (f.kind, f.order, f.shifted);
            let s = match sym_cache.get(&key) {
                Some(s) => s.clone(),
                None => {
                    let mut s = expand_symbol(f.kind, f.order, ctx);
                    if f.shifted {
                        s = s.compose_affine(1, -1, ctx);
                    }
                    sym_cache.insert(key, s.clone());
                    s
                }
            };
            e = e.mul(&s.pow(f.power));
        }
        if let Some(i) = &d.inner {
            let ie = inner.ok_or_else(|| Error::Invalid("missing inner-sum expansion".into()))?;
            e = e.mul(&ie.pow(i.power));
        }
        let mut den = Expansion::one(order, prec);
        for df in &d.denom {
            den = den.mul(&reciprocal_base(df.base, df.power, self.p, order, prec));
        }
        Ok(e.mul(&den))
    }

    /// Inner partial-sum expansion (without constant) and the summand's own expansion.
    pub fn inner_parts(&self, d: &SumDescriptor) -> Result<Option<(Expansion, Expansion)>, Error> {
        let Some(i) = &d.inner else { return Ok(None) };
        if i.term.alt || i.term.has_alt_factor() {
            return Err(Error::Unsupported("alternating inner sums in infinite series".into()));
        }
        if i.limit == Limit::TwoK {
            return Err(Error::Unsupported("inner limit 2k in infinite series".into()));
        }
        let g = self.smooth(&i.term, None)?;
        let ps = partial_sum_expansion(&g)?;
        Ok(Some((ps, g)))
    }

    /// Complete inner expansion from the partial-sum part, constant and limit.
    pub fn inner_full(&self, d: &SumDescriptor, ps: &Expansion, g: &Expansion, c: &HPReal) -> Expansion {
        let i = d.inner.as_ref().unwrap();
        let mut s = ps.add(&Expansion::constant(c, ps.order, ps.prec));
        s.constant_pending = false;
        if i.limit == Limit::KMinus1 {
            s = s.sub(g);
        }
        s
    }

    /// Full tail expansion; alternating sums are paired as f(2j-1) - f(2j),
    /// summands with alternating harmonic numbers as f(2j-1) ± f(2j).
    pub fn tail_expansion(&self, d: &SumDescriptor, inner: Option<&Expansion>) -> Result<Expansion, Error> {
        if d.has_alt_factor() {
            return self.parity_split(d, inner);
        }
        let e = self.smooth(d, inner)?;
        if d.alt {
            let odd = e.compose_affine(2, -1, self.ctx);
            let even = e.compose_affine(2, 0, self.ctx);
            Ok(odd.sub(&even))
        } else {
            Ok(e)
        }
    }
}

impl SummandExpansion<'_> {
    fn parity_split(&self, d: &SumDescriptor, inner: Option<&Expansion>) -> Result<Expansion, Error> {
        let ctx = self.ctx;
        let (order, prec) = (ctx.order, ctx.prec);
        let mut rest = d.clone();
        rest.factors.retain(|f| f.kind != HarmKind::Alt);
        rest.alt = false;
        let e = self.smooth(&rest, inner)?;
        let mut odd = e.compose_affine(2, -1, ctx);
        let mut even = e.compose_affine(2, 0, ctx);
        for f in d.factors.iter().filter(|f| f.kind == HarmKind::Alt) {
            let a_even = expand_symbol(HarmKind::Alt, f.order, ctx);
            // a_{2m-1} = a_{2m} + (2m)^-n
            let mut step = Expansion::zero(order, prec);
            step.add_at(0, f.order, &HPReal::one(prec).mul_pow2(-(f.order as i64)));
            let a_odd = a_even.add(&step);
            let (at_odd, at_even) = if f.shifted {
                // k-1 = 2m-2 resp. 2m-1
                (a_even.compose_affine(1, -1, ctx), a_odd)
            } else {
                (a_odd, a_even)
            };
            odd = odd.mul(&at_odd.pow(f.power));
            even = even.mul(&at_even.pow(f.power));
        }
        Ok(if d.alt { odd.sub(&even) } else { odd.add(&even) })
    }
}

/// Is |x| below 2^-bits relative to 1?
pub fn negligible(x: &HPReal, bits: i64) -> bool {
    x.is_zero() || x.top() < -bits
}

#[allow(dead_code)]
fn abs_r(x: &Rational) -> Rational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::harmonic;
    use crate::hp::{digits_to_bits, zeta_bits};

    fn ctx() -> AsymContext {
        AsymContext::new(digits_to_bits(60), 24)
    }

    fn close(a: &HPReal, b: &HPReal, digits: f64) -> bool {
        (a - b).abs().log10_abs() < -digits
    }

    #[test]
    fn harmonic_expansion_coefficients() {
        let c = ctx();
        let e = expand_symbol(HarmKind::Full, 1, &c);
        assert_eq!(e.coef(1, 0).to_f64(), 1.0);
        assert_eq!(e.coef(0, 1).to_f64(), 0.5);
        let h = expand_symbol(HarmKind::Odd, 1, &c);
        assert_eq!(h.coef(1, 0).to_f64(), 0.5);
        let want = &c.ln2 + &c.gamma.mul_pow2(-1);
        assert!(close(&h.coef(0, 0), &want, 55.0));
        let h2 = expand_symbol(HarmKind::Full, 2, &c);
        assert!(close(&h2.coef(0, 0), &zeta_bits(2, c.prec), 55.0));
        assert_eq!(h2.coef(0, 1).to_f64(), -1.0);
    }

    #[test]
    fn harmonic_expansion_matches_exact() {
        let c = ctx();
        for (kind, n) in [(HarmKind::Full, 1), (HarmKind::Odd, 1), (HarmKind::Full, 3), (HarmKind::Odd, 2)] {
            let e = expand_symbol(kind, n, &c);
            let mut errs = Vec::new();
            for k in [100u64, 1000] {
                let exact = HPReal::from_rational(&harmonic(kind, k, n), c.prec);
                let (v, _) = e.eval_at(k);
                errs.push((&v - &exact).abs().log10_abs());
            }
            // error ~ k^-(B+1): must shrink by many orders between the two
            assert!(errs[1] < -60.0, "{kind:?}{n}: {errs:?}");
            assert!(errs[0] < -40.0, "{kind:?}{n}: {errs:?}");
        }
    }

    #[test]
    fn mul_identity_and_commutes() {
        let c = ctx();
        let x = expand_symbol(HarmKind::Odd, 1, &c);
        let y = expand_symbol(HarmKind::Full, 2, &c);
        let one = Expansion::one(c.order, c.prec);
        let xi = x.mul(&one);
        for (a, b, v) in x.terms() {
            assert_eq!(&xi.coef(a, b), v);
        }
        let xy = x.mul(&y);
        let yx = y.mul(&x);
        for (a, b, v) in xy.terms() {
            let d = (v - &yx.coef(a, b)).abs();
            assert!(d.is_zero() || d.log10_abs() - v.abs().log10_abs() < -55.0);
        }
    }

    #[test]
    fn reciprocal_base_against_direct() {
        let c = ctx();
        let e = reciprocal_base(Base::TwoKMinus1, 1, 0, c.order, c.prec);
        let (v, _) = e.eval_at(100);
        let want = HPReal::one(c.prec).div_i64(199);
        // (1/200)^(B+1)-ish
        assert!(close(&v, &want, 50.0));
        let e = reciprocal_base(Base::KPlusP, 2, 5, c.order, c.prec);
        let (v, _) = e.eval_at(1000);
        assert!(close(&v, &HPReal::one(c.prec).div_i64(1005 * 1005), 55.0));
    }

    #[test]
    fn compose_shift_matches() {
        let c = ctx();
        let e = expand_symbol(HarmKind::Full, 1, &c);
        let s = e.compose_affine(1, -1, &c);
        let exact = HPReal::from_rational(&harmonic(HarmKind::Full, 999, 1), c.prec);
        let (v, _) = s.eval_at(1000);
        assert!(close(&v, &exact, 60.0));
        let t = e.compose_affine(2, -1, &c);
        let exact = HPReal::from_rational(&harmonic(HarmKind::Full, 1999, 1), c.prec);
        let (v, _) = t.eval_at(1000);
        assert!(close(&v, &exact, 60.0));
    }

    #[test]
    fn tail_definitions() {
        let prec = digits_to_bits(60);
        let mut t = TailTable::new(1000, prec).unwrap();
        let (v, e) = t.tail(0, 2).unwrap();
        let h = HPReal::from_rational(&harmonic(HarmKind::Full, 1000, 2), prec);
        assert!(close(&(&v + &h), &zeta_bits(2, prec), 58.0));
        assert!(e.log10_abs() < -60.0);
        // T(0,3,2) = ζ(3) - 1 - 1/8 needs the cutoff floor lifted, so check at K = 8
        let mut t = TailTable::new(8, prec).unwrap();
        let (v, e) = t.tail(0, 3).unwrap();
        let h = HPReal::from_rational(&harmonic(HarmKind::Full, 8, 3), prec);
        let d = (&(&v + &h) - &zeta_bits(3, prec)).abs();
        assert!(d.cmp_value(&e) != std::cmp::Ordering::Greater);
        assert!(t.tail(1, 1).is_err());
        assert!(TailTable::new(4, prec).is_err());
    }

    #[test]
    fn partial_sum_reproduces_gamma() {
        let c = ctx();
        let g = Expansion::monomial(0, 1, &HPReal::one(c.prec), c.order, c.prec);
        let ps = partial_sum_expansion(&g).unwrap();
        let s1 = HPReal::from_rational(&harmonic(HarmKind::Full, 1000, 1), c.prec);
        let s2 = HPReal::from_rational(&harmonic(HarmKind::Full, 10000, 1), c.prec);
        let (cst, err) = bootstrap_constant(&s1, 1000, &s2, 10000, &ps, true).unwrap();
        assert!(close(&cst, &c.gamma, 60.0), "{cst:?}");
        assert!(err.log10_abs() < -50.0);
    }

    #[test]
    fn tail_sum_rejects_divergent() {
        let c = ctx();
        let e = Expansion::monomial(0, 1, &HPReal::one(c.prec), c.order, c.prec);
        let mut t = TailTable::new(100, c.prec).unwrap();
        assert!(matches!(tail_sum(&e, &mut t), Err(Error::Divergent(_))));
    }
}
