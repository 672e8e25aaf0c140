//! Certified evaluation of Σ_{k≥1} d(k): floating head to K plus an
//! asymptotic tail, with inner partial sums completed by bootstrap.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::asym::{bootstrap_constant, tail_sum, AsymContext, Expansion, SummandExpansion, TailTable};
use crate::exact::HarmKind;
use crate::hp::{digits_to_bits, HPReal, GUARD_DIGITS};
use crate::summand::{Base, Limit, SumDescriptor};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalConfig {
    /// head cutoff K
    pub k: u64,
    /// expansion order B
    pub order: u32,
    /// target decimal digits
    pub digits: u32,
    /// bootstrap anchors; default (K/2, K)
    pub anchors: Option<(u64, u64)>,
    /// shift γ by 10^-n inside the expansions (cancellation check)
    pub gamma_shift: Option<u32>,
    /// retry once with 4K, B+8 on shortfall
    pub retry: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 4000, order: 24, digits: 60, anchors: None, gamma_shift: None, retry: true }
    }
}

impl EvalConfig {
    pub fn with_digits(digits: u32) -> Self {
        EvalConfig { digits, ..Self::default() }
    }

    pub fn anchors(&self) -> (u64, u64) {
        self.anchors.unwrap_or((self.k / 2, self.k))
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (k1, k2) = self.anchors();
        if self.k < 16 {
            return Err(Error::Domain(format!("head cutoff K = {} below 16", self.k)));
        }
        if self.order < 8 {
            return Err(Error::Domain(format!("expansion order B = {} below 8", self.order)));
        }
        if k2 < 2 * k1 || k2 > self.k || k1 < 8 {
            return Err(Error::Domain(format!("bootstrap anchors ({k1}, {k2}) invalid for K = {}", self.k)));
        }
        Ok(())
    }

    pub fn prec(&self) -> u32 {
        digits_to_bits(self.digits + GUARD_DIGITS)
    }

    fn escalated(&self) -> Self {
        EvalConfig { k: self.k * 4, order: self.order + 8, anchors: None, retry: false, ..self.clone() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub head_terms: u64,
    pub tail_monomials: usize,
    /// bootstrap constants, decimal
    pub bootstrap: Vec<String>,
    pub k_used: u64,
    pub order_used: u32,
    pub retried: bool,
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub value: HPReal,
    pub bound: HPReal,
    pub diagnostics: Diagnostics,
}

type CacheKey = (String, i64, EvalConfig);
type Slot = Arc<OnceLock<Result<EvalResult, Error>>>;

fn slots() -> &'static Mutex<HashMap<CacheKey, Slot>> {
    static C: OnceLock<Mutex<HashMap<CacheKey, Slot>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Drop every memoised sum, atom and constant value (for cold timings).
pub fn clear_caches() {
    slots().lock().unwrap().clear();
    crate::constants::clear_atom_cache();
    crate::hp::clear_constant_cache();
}

/// Σ_{k≥1} d(k). `p` must be given iff d uses the parameter.
pub fn evaluate_sum(d: &SumDescriptor, cfg: &EvalConfig, p: Option<i64>) -> Result<EvalResult, Error> {
    let d = d.normalized();
    d.validate()?;
    let pv = d.check_param(p)?;
    cfg.validate()?;
    let key = (d.to_string(), pv, cfg.clone());
    let slot = slots().lock().unwrap().entry(key).or_default().clone();
    slot.get_or_init(|| evaluate_uncached(&d, cfg, pv)).clone()
}

/// The inner infinite sum of a help function at a fixed parameter value.
pub fn evaluate_parametrized(d: &SumDescriptor, p: i64, cfg: &EvalConfig) -> Result<EvalResult, Error> {
    if !d.has_param() {
        return Err(Error::Arity(format!("{d} has no parameter slot")));
    }
    evaluate_sum(d, cfg, Some(p))
}

fn evaluate_uncached(d: &SumDescriptor, cfg: &EvalConfig, p: i64) -> Result<EvalResult, Error> {
    let first = evaluate_once(d, cfg, p);
    let target = HPReal::parse(&format!("1e-{}", cfg.digits), cfg.prec())?;
    let ok = |r: &Result<EvalResult, Error>| match r {
        Ok(r) => r.bound.cmp_value(&target).is_le(),
        Err(Error::Shortfall(_)) | Err(Error::InsufficientOrder(_)) => false,
        Err(_) => true,
    };
    if ok(&first) {
        return first;
    }
    let second = if cfg.retry {
        let mut r = evaluate_once(d, &cfg.escalated(), p);
        if let Ok(r) = &mut r {
            r.diagnostics.retried = true;
        }
        r
    } else {
        first
    };
    match second {
        Ok(r) if r.bound.cmp_value(&target).is_gt() => Err(Error::Shortfall(format!(
            "{d}: bound {} exceeds 1e-{} at K = {}, B = {}",
            r.bound.to_sci(3),
            cfg.digits,
            r.diagnostics.k_used,
            r.diagnostics.order_used
        ))),
        other => other,
    }
}

/// Running H/h values at k and k-1 for the symbols a summand needs.
struct Running {
    syms: Vec<(HarmKind, u32)>,
    cur: Vec<HPReal>,
    prev: Vec<HPReal>,
}

impl Running {
    fn new(syms: Vec<(HarmKind, u32)>, prec: u32) -> Self {
        let n = syms.len();
        Running { syms, cur: vec![HPReal::zero(prec); n], prev: vec![HPReal::zero(prec); n] }
    }

    fn advance(&mut self, k: u64, prec: u32) {
        for (i, (kind, n)) in self.syms.iter().enumerate() {
            let den = BigInt::from(kind.base(k)).pow(*n);
            let inc = HPReal::from_ratio(&BigInt::from(kind.sign(k)), &den, prec);
            self.prev[i] = self.cur[i].clone();
            self.cur[i] += &inc;
        }
    }

    fn get(&self, kind: HarmKind, n: u32, shifted: bool) -> &HPReal {
        let i = self.syms.iter().position(|s| *s == (kind, n)).expect("symbol registered");
        if shifted {
            &self.prev[i]
        } else {
            &self.cur[i]
        }
    }
}

/// Numerator product (without inner sum), denominator integer, sign.
fn local_term(d: &SumDescriptor, k: u64, p: i64, run: &Running, prec: u32) -> Result<HPReal, Error> {
    let mut v = HPReal::one(prec);
    for f in &d.factors {
        v = &v * &run.get(f.kind, f.order, f.shifted).powi(f.power);
    }
    let mut den = BigInt::one();
    for df in &d.denom {
        let (a, b) = df.base.affine(p);
        let base = a as i128 * k as i128 + b as i128;
        if base == 0 {
            if df.base == Base::KMinusP {
                return Ok(HPReal::zero(prec));
            }
            return Err(Error::Domain(format!("zero denominator at k = {k}")));
        }
        den *= BigInt::from(base).pow(df.power);
    }
    if den != BigInt::one() {
        v = &v / &HPReal::from_bigint(den, prec);
    }
    if d.alt && k % 2 == 0 {
        v = -v;
    }
    Ok(v)
}

struct Head {
    value: HPReal,
    inner_at: Option<(HPReal, HPReal)>,
    max_term: HPReal,
}

fn head(d: &SumDescriptor, k_max: u64, anchors: (u64, u64), p: i64, prec: u32) -> Result<Head, Error> {
    let mut run = Running::new(d.symbols(), prec);
    let mut acc = HPReal::zero(prec);
    let mut s = HPReal::zero(prec);
    let mut s1 = None;
    let mut s2 = None;
    let mut max_term = HPReal::zero(prec);
    for k in 1..=k_max {
        run.advance(k, prec);
        let mut t = local_term(d, k, p, &run, prec)?;
        if let Some(i) = &d.inner {
            let prev = s.clone();
            s += &local_term(&i.term, k, 0, &run, prec)?;
            let iv = match i.limit {
                Limit::K => &s,
                Limit::KMinus1 => &prev,
                Limit::TwoK => return Err(Error::Unsupported("inner limit 2k in infinite series".into())),
            };
            t = &t * &iv.powi(i.power);
            if k == anchors.0 {
                s1 = Some(s.clone());
            }
            if k == anchors.1 {
                s2 = Some(s.clone());
            }
        }
        if t.abs().cmp_value(&max_term).is_gt() {
            max_term = t.abs();
        }
        acc += &t;
    }
    let inner_at = match (s1, s2) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    Ok(Head { value: acc, inner_at, max_term })
}

fn evaluate_once(d: &SumDescriptor, cfg: &EvalConfig, p: i64) -> Result<EvalResult, Error> {
    let prec = cfg.prec();
    let (k1, k2) = cfg.anchors();
    let k = cfg.k + cfg.k % 2;
    let mut ctx = AsymContext::new(prec, cfg.order);
    if let Some(sh) = cfg.gamma_shift {
        let g = &ctx.gamma + &HPReal::parse(&format!("1e-{sh}"), prec)?;
        ctx = ctx.with_gamma(g);
    }
    let h = head(d, k, (k1, k2), p, prec)?;
    let se = SummandExpansion { ctx: &ctx, p };
    let mut diag = Diagnostics { head_terms: k, k_used: k, order_used: cfg.order, ..Default::default() };

    let mut inner_exp: Option<Expansion> = None;
    let mut inner_err = HPReal::zero(prec);
    let mut inner_plus: Option<Expansion> = None;
    let delta = HPReal::one(prec).mul_pow2(-(prec as i64) / 3);
    if let Some((ps, g)) = se.inner_parts(d)? {
        let (s1, s2) = h.inner_at.as_ref().expect("anchors inside head");
        // a shifted γ makes the anchors disagree on purpose
        let (c, err) = bootstrap_constant(s1, k1, s2, k2, &ps, cfg.gamma_shift.is_none())?;
        diag.bootstrap.push(c.to_sci(cfg.digits.min(40)));
        inner_exp = Some(se.inner_full(d, &ps, &g, &c));
        inner_plus = Some(se.inner_full(d, &ps, &g, &(&c + &delta)));
        inner_err = err;
    }
    let cutoff = if d.alt || d.has_alt_factor() { k / 2 } else { k };
    if d.denom.iter().any(|f| f.base == Base::KMinusP) && p as u64 >= cutoff {
        return Err(Error::Domain(format!("parameter {p} beyond the head cutoff {cutoff}")));
    }
    let mut table = TailTable::new(cutoff, prec)?;
    let e = se.tail_expansion(d, inner_exp.as_ref())?;
    diag.tail_monomials = e.len();
    let (tail, mut bound) = tail_sum(&e, &mut table)?;
    if let Some(ip) = &inner_plus {
        // sensitivity of the tail to the bootstrap constant
        let ep = se.tail_expansion(d, Some(ip))?;
        let (tp, _) = tail_sum(&ep, &mut table)?;
        let slope = (&tp - &tail).abs() / &delta;
        bound += &(&slope.mul_i64(2) * &inner_err);
    }
    // head rounding: each term carries a few ulps relative to the largest term
    let ulp = h.max_term.mul_pow2(-(prec as i64) + 6).mul_i64(k as i64);
    bound += &ulp;
    Ok(EvalResult { value: &h.value + &tail, bound, diagnostics: diag })
}
