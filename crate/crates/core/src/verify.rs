//! Runs catalog entries through the engine and reports verdicts.
//!
//! Each side is evaluated on its own. A mismatch is a `fail` verdict, never an
//! error; engine shortfalls become `inconclusive`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::catalog::{hex, Catalog, Class, Filter, IdentityEntry, Kind, Status};
use crate::constants::{eval_atom, Atom, Conventions};
use crate::eval::EvalConfig;
use crate::exact::{check_finite_lemma, HarmonicCache, Rational};
use crate::expr::{Expr, NumCtx};
use crate::hp::HPReal;
use crate::Error;

/// Parameter values at which help functions are checked.
pub const DEFAULT_PARAMS: [i64; 6] = [1, 2, 3, 5, 10, 25];
/// Upper end of the exact k-sweep for finite identities.
pub const DEFAULT_LEMMA_KMAX: u64 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// K, B and retry policy; `digits` is replaced per entry
    pub eval: EvalConfig,
    /// working digits for every entry instead of the class default
    pub digits: Option<u32>,
    /// `None`: select from the catalog's MZV reductions
    pub conventions: Option<Conventions>,
    pub params: Vec<i64>,
    pub lemma_kmax: u64,
    pub timing: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            eval: EvalConfig::default(),
            digits: None,
            conventions: None,
            params: DEFAULT_PARAMS.to_vec(),
            lemma_kmax: DEFAULT_LEMMA_KMAX,
            timing: true,
        }
    }
}

impl VerifyOptions {
    pub fn entry_config(&self, class: Class) -> EvalConfig {
        EvalConfig { digits: self.digits.unwrap_or(class.digits()), ..self.eval.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordConfig {
    pub k: u64,
    pub order: u32,
    pub digits: u32,
    pub conventions: Conventions,
}

/// One evaluated instance of an entry (a parameter value, or the entry itself).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCheck {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<i64>,
    pub lhs: String,
    pub lhs_bound: String,
    pub rhs: String,
    pub rhs_bound: String,
    pub delta: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationRecord {
    pub id: String,
    pub family: String,
    pub kind: Kind,
    pub class: Class,
    pub status: Status,
    /// values at the worst point
    pub lhs: String,
    pub lhs_bound: String,
    pub rhs: String,
    pub rhs_bound: String,
    pub delta: String,
    /// log10 |Δ|; None when Δ is exactly zero or unavailable
    pub log10_delta: Option<f64>,
    pub tolerance: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    pub config: RecordConfig,
}

const SHOW: u32 = 40;

fn sci(x: &HPReal) -> String {
    x.to_sci(SHOW)
}

fn short(x: &HPReal) -> String {
    x.to_sci(3)
}

fn tolerance(class: Class) -> String {
    format!("1e-{}", class.tol_exp())
}

struct Numeric {
    point: PointCheck,
    delta: Option<HPReal>,
}

fn judge(lhs: &Expr, rhs: &Expr, ctx: &NumCtx, class: Class) -> Numeric {
    let prec = ctx.cfg.prec();
    let tol = HPReal::parse(&tolerance(class), prec).expect("valid literal");
    let quarter = tol.div_i64(4);
    let l = lhs.eval_numeric(ctx);
    let r = rhs.eval_numeric(ctx);
    match (l, r) {
        (Ok((lv, lb)), Ok((rv, rb))) => {
            let d = (&lv - &rv).abs();
            let loose = lb.cmp_value(&quarter).is_ge() || rb.cmp_value(&quarter).is_ge();
            let verdict = if loose {
                Verdict::Inconclusive
            } else if d.cmp_value(&tol).is_lt() {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            let note = loose.then(|| "error bound exceeds tolerance/4".to_string());
            Numeric {
                point: PointCheck {
                    p: ctx.p,
                    lhs: sci(&lv),
                    lhs_bound: short(&lb),
                    rhs: sci(&rv),
                    rhs_bound: short(&rb),
                    delta: short(&d),
                    verdict,
                    note,
                },
                delta: Some(d),
            }
        }
        (l, r) => {
            let msg = [l.err().map(|e| format!("lhs: {e}")), r.err().map(|e| format!("rhs: {e}"))]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join("; ");
            let na = || "n/a".to_string();
            Numeric {
                point: PointCheck {
                    p: ctx.p,
                    lhs: na(),
                    lhs_bound: na(),
                    rhs: na(),
                    rhs_bound: na(),
                    delta: na(),
                    verdict: Verdict::Inconclusive,
                    note: Some(msg),
                },
                delta: None,
            }
        }
    }
}

/// Verify one entry under fixed conventions.
pub fn verify_entry(e: &IdentityEntry, opts: &VerifyOptions, conv: Conventions) -> VerificationRecord {
    let t0 = Instant::now();
    let cfg = opts.entry_config(e.class);
    let config = RecordConfig { k: cfg.k, order: cfg.order, digits: cfg.digits, conventions: conv };
    let mut notes = Vec::new();
    if e.status == Status::ConventionDependent {
        notes.push("convention-dependent: the singular k = p term is omitted".to_string());
    }
    let mut rec = VerificationRecord {
        id: e.id.clone(),
        family: e.family.clone(),
        kind: e.kind,
        class: e.class,
        status: e.status,
        lhs: String::new(),
        lhs_bound: String::new(),
        rhs: String::new(),
        rhs_bound: String::new(),
        delta: String::new(),
        log10_delta: None,
        tolerance: tolerance(e.class),
        verdict: Verdict::Pass,
        points: Vec::new(),
        notes,
        wall_ms: None,
        config,
    };
    match e.kind {
        Kind::FiniteIdentity => finite(e, opts.lemma_kmax, &mut rec),
        Kind::ParametrizedIdentity => {
            let mut worst: Option<(usize, Option<HPReal>)> = None;
            for &p in &opts.params {
                let ctx = NumCtx { cfg: cfg.clone(), conv, p: Some(p) };
                let n = judge(&e.lhs, &e.rhs, &ctx, e.class);
                let i = rec.points.len();
                rec.points.push(n.point);
                let replace = match (&worst, &n.delta) {
                    (None, _) => true,
                    (Some((_, None)), _) => false,
                    (Some((_, Some(_))), None) => true,
                    (Some((_, Some(w))), Some(d)) => d.cmp_value(w).is_gt(),
                };
                if replace {
                    worst = Some((i, n.delta));
                }
            }
            rec.verdict = combine(rec.points.iter().map(|p| p.verdict));
            if let Some((i, d)) = worst {
                fill(&mut rec, i, d.as_ref());
            }
            let bad: Vec<String> = rec
                .points
                .iter()
                .filter(|p| p.verdict != Verdict::Pass)
                .map(|p| format!("p = {}: {}", p.p.unwrap_or(0), p.verdict))
                .collect();
            if !bad.is_empty() {
                rec.notes.push(bad.join(", "));
            }
        }
        Kind::InfiniteIdentity | Kind::InterSumRelation => {
            let ctx = NumCtx { cfg, conv, p: None };
            let n = judge(&e.lhs, &e.rhs, &ctx, e.class);
            rec.points.push(n.point);
            rec.verdict = rec.points[0].verdict;
            fill(&mut rec, 0, n.delta.as_ref());
            let pt = rec.points.pop().expect("one point");
            if let Some(note) = pt.note {
                rec.notes.push(note);
            }
        }
    }
    if opts.timing {
        rec.wall_ms = Some((t0.elapsed().as_secs_f64() * 1e4).round() / 10.0);
    }
    rec
}

fn fill(rec: &mut VerificationRecord, i: usize, d: Option<&HPReal>) {
    let p = &rec.points[i];
    rec.lhs = p.lhs.clone();
    rec.lhs_bound = p.lhs_bound.clone();
    rec.rhs = p.rhs.clone();
    rec.rhs_bound = p.rhs_bound.clone();
    rec.delta = p.delta.clone();
    rec.log10_delta = d.map(|d| d.log10_abs()).filter(|x| x.is_finite()).map(|x| (x * 100.0).round() / 100.0);
}

fn combine(vs: impl Iterator<Item = Verdict>) -> Verdict {
    vs.max().unwrap_or(Verdict::Inconclusive)
}

fn finite(e: &IdentityEntry, kmax: u64, rec: &mut VerificationRecord) {
    let mut cache = HarmonicCache::new();
    let mut first_bad: Option<(u64, Rational, Rational)> = None;
    let mut last = None;
    for k in 1..=kmax {
        match check_finite_lemma(e, k, &mut cache) {
            Ok(c) => {
                if !c.pass && first_bad.is_none() {
                    first_bad = Some((c.k, c.lhs.clone(), c.rhs.clone()));
                }
                last = Some(c);
            }
            Err(err) => {
                rec.verdict = Verdict::Inconclusive;
                rec.notes.push(format!("k = {k}: {err}"));
                return;
            }
        }
    }
    rec.tolerance = "exact".into();
    let show = |k: u64, l: &Rational, r: &Rational, rec: &mut VerificationRecord| {
        let prec = 200;
        rec.lhs = sci(&HPReal::from_rational(l, prec));
        rec.rhs = sci(&HPReal::from_rational(r, prec));
        rec.lhs_bound = "0".into();
        rec.rhs_bound = "0".into();
        let d = (l - r).abs();
        rec.delta = if d.is_zero() { "0".into() } else { short(&HPReal::from_rational(&d, prec)) };
        rec.log10_delta = (!d.is_zero()).then(|| (HPReal::from_rational(&d, prec).log10_abs() * 100.0).round() / 100.0);
        rec.notes.push(format!("exact rational check for k = 1..={kmax}; shown at k = {k}"));
    };
    match (first_bad, last) {
        (Some((k, l, r)), _) => {
            rec.verdict = Verdict::Fail;
            show(k, &l, &r, rec);
        }
        (None, Some(c)) => {
            rec.verdict = Verdict::Pass;
            show(c.k, &c.lhs, &c.rhs, rec);
        }
        (None, None) => {
            rec.verdict = Verdict::Inconclusive;
            rec.notes.push("empty k range".into());
        }
    }
}

/// How the alternating-MZV sign conventions were fixed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConventionChoice {
    pub conventions: Conventions,
    pub evidence: Vec<String>,
}

/// Fix the σ sign of the alternating MZV atoms. The sign is one notational
/// choice, so eq126 decides it for all three atoms; eq332 is then only a
/// check, and it overrides the depth-3 signs only if the uniform choice fails
/// there while another one passes.
pub fn select_conventions(cat: &Catalog, opts: &VerifyOptions) -> ConventionChoice {
    let mut conv = Conventions::default();
    let mut evidence = Vec::new();
    let residual = |e: &IdentityEntry, c: Conventions| -> Option<HPReal> {
        let ctx = NumCtx { cfg: opts.entry_config(e.class), conv: c, p: None };
        let (l, _) = e.lhs.eval_numeric(&ctx).ok()?;
        let (r, _) = e.rhs.eval_numeric(&ctx).ok()?;
        Some((&l - &r).abs())
    };
    let within = |e: &IdentityEntry, r: &HPReal| r.log10_abs() < -(e.class.tol_exp() as f64);
    match cat.get("eq126") {
        Some(e) => {
            let best = [1i8, -1]
                .into_iter()
                .filter_map(|s| residual(e, Conventions { mzv51: s, mzv511: s, mzv331: s }).map(|r| (s, r)))
                .min_by(|a, b| a.1.cmp_value(&b.1));
            if let Some((s, r)) = best {
                conv = Conventions { mzv51: s, mzv511: s, mzv331: s };
                evidence.push(format!("eq126 selects sign {s} (log10 residual {:.1})", r.log10_abs()));
            }
        }
        None => evidence.push("eq126 absent: default sign".into()),
    }
    if let Some(e) = cat.get("eq332") {
        match residual(e, conv) {
            Some(r) if within(e, &r) => {
                evidence.push(format!("eq332 agrees (log10 residual {:.1})", r.log10_abs()));
            }
            _ => {
                let alt = [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)]
                    .into_iter()
                    .map(|(a, b)| Conventions { mzv511: a, mzv331: b, ..conv })
                    .filter(|c| *c != conv)
                    .filter_map(|c| residual(e, c).map(|r| (c, r)))
                    .find(|(_, r)| within(e, r));
                match alt {
                    Some((c, r)) => {
                        conv = c;
                        evidence.push(format!(
                            "eq332 overrides: mzv511 sign {}, mzv331 sign {} (log10 residual {:.1})",
                            c.mzv511,
                            c.mzv331,
                            r.log10_abs()
                        ));
                    }
                    None => evidence.push("eq332 fails under every sign choice".into()),
                }
            }
        }
    }
    ConventionChoice { conventions: conv, evidence }
}

fn resolve(cat: &Catalog, opts: &VerifyOptions) -> ConventionChoice {
    match opts.conventions {
        Some(c) => ConventionChoice { conventions: c, evidence: vec!["fixed by caller".into()] },
        None => select_conventions(cat, opts),
    }
}

/// Verify one entry by id.
pub fn verify(cat: &Catalog, id: &str, opts: &VerifyOptions) -> Result<VerificationRecord, Error> {
    let e = cat.get(id).ok_or_else(|| Error::Lookup(format!("no catalog entry '{id}'")))?;
    let conv = if needs_mzv(e) { resolve(cat, opts).conventions } else { opts.conventions.unwrap_or_default() };
    Ok(verify_entry(e, opts, conv))
}

fn needs_mzv(e: &IdentityEntry) -> bool {
    e.sides().iter().any(|s| s.atoms().iter().any(|a| a.name().starts_with("mzv")))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl Summary {
    fn of(records: &[VerificationRecord]) -> Summary {
        let n = |v| records.iter().filter(|r| r.verdict == v).count();
        Summary {
            total: records.len(),
            pass: n(Verdict::Pass),
            fail: n(Verdict::Fail),
            inconclusive: n(Verdict::Inconclusive),
            wall_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportHeader {
    pub catalog_hash: String,
    pub k: u64,
    pub order: u32,
    pub digits: Option<u32>,
    pub params: Vec<i64>,
    pub lemma_kmax: u64,
    pub conventions: ConventionChoice,
    /// SHA-256 of each atom's decimal value at the header precision
    pub atoms: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub header: ReportHeader,
    pub records: Vec<VerificationRecord>,
    pub summary: Summary,
}

/// Hash of every atom's value printed to `digits` significant digits.
pub fn atom_hashes(digits: u32, conv: &Conventions) -> BTreeMap<String, String> {
    Atom::all()
        .into_iter()
        .map(|a| {
            let text = match eval_atom(a, digits, conv) {
                Ok((v, _)) => v.to_sci(digits),
                Err(e) => format!("error: {e}"),
            };
            (a.name().to_string(), hex(&Sha256::digest(text.as_bytes()))[..16].to_string())
        })
        .collect()
}

/// Verify every matching entry in parallel; records come back ordered by id.
pub fn verify_all(cat: &Catalog, filter: &Filter, opts: &VerifyOptions) -> Report {
    let t0 = Instant::now();
    let choice = resolve(cat, opts);
    let conv = choice.conventions;
    let mut records: Vec<VerificationRecord> =
        cat.query(filter).into_par_iter().map(|e| verify_entry(e, opts, conv)).collect();
    records.sort_by_key(|r| crate::catalog::id_number(&r.id).unwrap_or(0));
    let mut summary = Summary::of(&records);
    if opts.timing {
        summary.wall_ms = Some((t0.elapsed().as_secs_f64() * 1e4).round() / 10.0);
    }
    let hdigits = opts.digits.unwrap_or(Class::A.digits());
    let header = ReportHeader {
        catalog_hash: cat.hash.clone(),
        k: opts.eval.k,
        order: opts.eval.order,
        digits: opts.digits,
        params: opts.params.clone(),
        lemma_kmax: opts.lemma_kmax,
        atoms: atom_hashes(hdigits, &conv),
        conventions: choice,
    };
    Report { header, records, summary }
}

impl Report {
    /// Header line, one line per record, summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = tagged("header", &self.header);
        for r in &self.records {
            out += &tagged("record", r);
        }
        out += &tagged("summary", &self.summary);
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<7} {:<10} {:<13} {:<5} {:>9}  {:>10}", "id", "family", "verdict", "class", "|delta|", "time");
        for r in &self.records {
            let t = r.wall_ms.map(|m| format!("{:.1} ms", m)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<7} {:<10} {:<13} {:<5} {:>9}  {:>10}",
                r.id,
                r.family,
                r.verdict,
                r.class.to_string(),
                r.delta,
                t
            );
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} entries: {} pass, {} fail, {} inconclusive",
            s.total, s.pass, s.fail, s.inconclusive
        );
        let _ = writeln!(out, "catalog sha256 {}", self.header.catalog_hash);
        let _ = writeln!(out, "conventions: {}", self.header.conventions.conventions.describe());
        out
    }
}

fn tagged<T: Serialize>(ty: &str, body: &T) -> String {
    #[derive(Serialize)]
    struct Tagged<'a, T> {
        #[serde(rename = "type")]
        ty: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut s = serde_json::to_string(&Tagged { ty, body }).expect("serializable");
    s.push('\n');
    s
}

/// Result of re-deriving an entry from the entries it is derived from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyRecord {
    pub id: String,
    pub derived_from: Vec<String>,
    /// multiplier of each source relation (lhs - rhs)
    pub coefficients: Vec<(String, String)>,
    /// target relation minus the combination; "0" on success
    pub residual: String,
    pub pass: bool,
}

/// Exact termwise check: is (lhs - rhs) of the target a rational combination
/// of (lhs - rhs) of its sources?
pub fn consistency_check(cat: &Catalog, id: &str) -> Result<ConsistencyRecord, Error> {
    let e = cat.get(id).ok_or_else(|| Error::Lookup(format!("no catalog entry '{id}'")))?;
    if e.derived_from.is_empty() {
        return Err(Error::Lookup(format!("{id} has no derived_from links")));
    }
    let rel = |x: &IdentityEntry| x.lhs.sub(&x.rhs);
    let target = rel(e);
    let mut sources = Vec::new();
    for s in &e.derived_from {
        let x = cat.get(s).ok_or_else(|| Error::Lookup(format!("{id}: unknown source {s}")))?;
        sources.push(rel(x));
    }
    let c = solve(&sources, &target);
    let mut comb = Expr::zero();
    for (v, ci) in sources.iter().zip(&c) {
        comb = comb.add(&v.scale(ci));
    }
    let residual = target.sub(&comb);
    Ok(ConsistencyRecord {
        id: e.id.clone(),
        derived_from: e.derived_from.clone(),
        coefficients: e.derived_from.iter().cloned().zip(c.iter().map(|x| x.to_string())).collect(),
        pass: residual.terms.is_empty(),
        residual: residual.to_string(),
    })
}

// Gauss-Jordan over the symbol rows; free columns get 0.
fn solve(cols: &[Expr], t: &Expr) -> Vec<Rational> {
    let mut syms: Vec<_> = cols.iter().flat_map(|c| c.terms.keys()).chain(t.terms.keys()).cloned().collect();
    syms.sort();
    syms.dedup();
    let n = cols.len();
    let get = |e: &Expr, s| e.terms.get(s).cloned().unwrap_or_else(Rational::zero);
    let mut m: Vec<Vec<Rational>> = syms
        .iter()
        .map(|s| cols.iter().map(|c| get(c, s)).chain(std::iter::once(get(t, s))).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(pr) = (row..m.len()).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(row, pr);
        let inv = Rational::one() / &m[row][col];
        for x in m[row].iter_mut() {
            *x *= &inv;
        }
        for r in 0..m.len() {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for j in 0..=n {
                    let v = &m[row][j] * &f;
                    m[r][j] -= v;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    let mut c = vec![Rational::zero(); n];
    for (r, col) in pivots {
        c[col] = m[r][n].clone();
    }
    c
}
