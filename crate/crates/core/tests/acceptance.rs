//! Acceptance criteria 1-8: one printed pass/fail line each.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;

use eulersums::catalog::id_number;
use eulersums::expr::SumRef;
use eulersums::verify::{select_conventions, verify_entry};
use eulersums::{
    check_finite_lemma, clear_caches, consistency_check, discover, evaluate_sum, verify_all, zeta_basis, Catalog, ClosedForm,
    Coverage, DiscoverConfig, EvalConfig, Expr, Filter, HarmonicCache, HPReal, IdentityEntry, Kind, NumCtx,
    SumDescriptor, Verdict, VerifyOptions,
};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn delta_of(s: &str) -> f64 {
    s.parse::<f64>().unwrap_or(f64::INFINITY)
}

fn entry<'a>(cat: &'a Catalog, id: &str) -> &'a IdentityEntry {
    cat.get(id).unwrap_or_else(|| panic!("{id} missing from the shipped catalog"))
}

fn criterion1(cat: &Catalog) -> Outcome {
    let t = Instant::now();
    let ids = ["eq50", "eq90", "eq116", "eq117", "eq142", "eq179"];
    let mut bad = Vec::new();
    for id in ids {
        let e = entry(cat, id);
        let mut c = HarmonicCache::new();
        for k in 1..=500 {
            match check_finite_lemma(e, k, &mut c) {
                Ok(r) if r.pass => {}
                _ => {
                    bad.push(format!("{id}@k={k}"));
                    break;
                }
            }
        }
    }
    let el = t.elapsed();
    outcome(
        bad.is_empty() && el < Duration::from_secs(60),
        format!("6 lemmas x k=1..500 exact, {:.1} s, failures {bad:?}", el.as_secs_f64()),
    )
}

fn criterion2(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let ids = ["eq5", "eq6", "eq15", "eq71", "eq129", "eq144", "eq194"];
    let conv = opts.conventions.unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for id in ids {
        let r = verify_entry(entry(cat, id), opts, conv);
        let ps: Vec<i64> = r.points.iter().filter_map(|p| p.p).collect();
        if ps != [1, 2, 3, 5, 10, 25] {
            bad.push(format!("{id}: params {ps:?}"));
        }
        for p in &r.points {
            let d = delta_of(&p.delta);
            worst = worst.max(d.log10());
            if !(d < 1e-30) || p.verdict != Verdict::Pass {
                bad.push(format!("{id}@p={:?}: {} {}", p.p, p.delta, p.verdict));
            }
        }
    }
    outcome(bad.is_empty(), format!("7 help functions x 6 parameters, worst log10|delta| {worst:.1}, failures {bad:?}"))
}

fn criterion3(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let want = [("eq34", 35), ("eq124", 35), ("eq186", 35), ("eq321", 35), ("eq322", 35), ("eq126", 30), ("eq323", 30)];
    let conv = opts.conventions.unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (id, tol) in want {
        let t = Instant::now();
        let r = verify_entry(entry(cat, id), opts, conv);
        let el = t.elapsed();
        let d = delta_of(&r.delta);
        let good = r.verdict == Verdict::Pass && d < 10f64.powi(-tol) && el < Duration::from_secs(30);
        ok &= good;
        parts.push(format!("{id} {:.1}/{:.2}s{}", d.log10(), el.as_secs_f64(), if good { "" } else { " FAIL" }));
    }
    outcome(ok, format!("log10|delta|/time: {}", parts.join(", ")))
}

fn criterion4(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let mut all = Vec::new();
    for order in [4, 5, 6] {
        let f = Filter { order: Some(order), ..Filter::default() };
        all.extend(pool.install(|| verify_all(cat, &f, opts)).records);
    }
    let el = t.elapsed();
    let cov = Coverage::builtin();
    let verified: std::collections::BTreeSet<u32> = all.iter().filter_map(|r| id_number(&r.id)).collect();
    let missing: Vec<u32> = cov
        .in_scope_ids()
        .into_iter()
        .filter(|n| *n <= 327 && !verified.contains(n) && !cov.excluded_ids().contains(n))
        .collect();
    let n = |v| all.iter().filter(|r| r.verdict == v).count();
    let (pass, fail, inc) = (n(Verdict::Pass), n(Verdict::Fail), n(Verdict::Inconclusive));
    let undiagnosed = all.iter().filter(|r| r.verdict == Verdict::Fail && r.log10_delta.is_none()).count();
    let failing: Vec<&str> = all.iter().filter(|r| r.verdict == Verdict::Fail).map(|r| r.id.as_str()).collect();
    println!("  orders 4-6 failing entries (reported with |delta|): {failing:?}");
    outcome(
        inc == 0 && missing.is_empty() && undiagnosed == 0 && el < Duration::from_secs(20 * 60),
        format!(
            "{} entries single-threaded in {:.1} s: {pass} pass, {fail} fail, {inc} inconclusive; uncovered ids {missing:?}",
            all.len(),
            el.as_secs_f64()
        ),
    )
}

fn criterion5(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let a = consistency_check(cat, "eq322").unwrap();
    let b = consistency_check(cat, "eq127").unwrap();
    let conv = opts.conventions.unwrap();
    let e = entry(cat, "eq128");
    let r = verify_entry(e, opts, conv);
    let d = delta_of(&r.delta);
    // the combination as printed, with -3/4 on Σ H h²/k³, for the record
    let literal =
        Expr::parse("31/32*[H^3 / k^3] - 1/4*[h^3 / k^3] - 3/4*[H h^2 / k^3] - 3/16*[H^2 h / k^3]").unwrap();
    let ctx = NumCtx { cfg: opts.entry_config(e.class), conv, p: None };
    let (lv, _) = e.lhs.eval_numeric(&ctx).unwrap();
    let (rv, _) = literal.eval_numeric(&ctx).unwrap();
    let lit = (&lv - &rv).abs().log10_abs();
    outcome(
        a.pass && b.pass && r.verdict == Verdict::Pass && d < 1e-30,
        format!(
            "eq322 from {:?} residual {}; eq127 from {:?} residual {}; eq128 log10|delta| {:.1} (printed -3/4 coefficient: {lit:.2})",
            a.coefficients, a.residual, b.coefficients, b.residual, d.log10()
        ),
    )
}

// Positive terms only; returns Σ_{k≤N} f(k) and a bracket for the remainder.
fn brute(f: &dyn Fn(&Running) -> f64, n: u64, rem: &dyn Fn(&Running) -> (f64, f64)) -> (f64, f64) {
    let mut run = Running::default();
    let mut s = Dd::default();
    for k in 1..=n {
        run.step(k);
        s.add(f(&run));
    }
    let (lo, hi) = rem(&run);
    (s.hi + s.lo + lo, s.hi + s.lo + hi)
}

const N: u64 = 10_000_000;

// num(k) ≤ num(N)(k/N)^δ for k > N; Σ_{k>N} k^-b within [∫_{N+1}, ∫_N]
fn power_rem(num: f64, b: f64, delta: f64) -> (f64, f64) {
    let nf = N as f64;
    let lo = num / ((b - 1.0) * (nf + 1.0).powf(b - 1.0));
    let hi = num * 1.000001 / ((b - 1.0 - delta) * nf.powf(b - 1.0));
    (lo, hi)
}

#[derive(Default, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
        self.lo += err;
    }
    fn v(&self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Default)]
struct Running {
    k: f64,
    h1: Dd,
    h2: Dd,
    o1: Dd,
    inner: Dd,
}

impl Running {
    fn step(&mut self, k: u64) {
        let kf = k as f64;
        self.k = kf;
        self.h1.add(1.0 / kf);
        self.h2.add(1.0 / (kf * kf));
        self.o1.add(1.0 / (2.0 * kf - 1.0));
        self.inner.add(self.h1.v() / (kf * kf));
    }
}

fn criterion6(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // K-invariance on 20 catalog descriptors
    let mut descs: Vec<SumDescriptor> = cat
        .entries
        .iter()
        .flat_map(|e| e.sides().into_iter().flat_map(|s| s.sums().cloned().collect::<Vec<_>>()))
        .filter_map(|s| match s {
            SumRef::Series(d) => Some(d),
            SumRef::Point(_) => None,
        })
        .collect();
    descs.sort();
    descs.dedup();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let pick: Vec<SumDescriptor> = descs.choose_multiple(&mut rng, 20).cloned().collect();
    let mut kbad = Vec::new();
    for d in &pick {
        let p = d.has_param().then_some(3);
        let c1 = EvalConfig { k: 1000, digits: 45, ..EvalConfig::default() };
        let c2 = EvalConfig { k: 2000, ..c1.clone() };
        match (evaluate_sum(d, &c1, p), evaluate_sum(d, &c2, p)) {
            (Ok(a), Ok(b)) => {
                if (&a.value - &b.value).abs().cmp_value(&(&a.bound + &b.bound)).is_gt() {
                    kbad.push(d.to_string());
                }
            }
            _ => kbad.push(format!("{d} (error)")),
        }
    }
    ok &= kbad.is_empty();
    notes.push(format!("K-invariance {}/20", 20 - kbad.len()));

    // γ-perturbation: shift γ by 10^(-digits/2), residuals move by < 10^(-digits/2+5)
    let conv = opts.conventions.unwrap();
    let mut gbad = Vec::new();
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for e in &cat.entries {
        if matches!(e.kind, Kind::FiniteIdentity) {
            continue;
        }
        let cfg = opts.entry_config(e.class);
        let half = cfg.digits / 2;
        let shifted = EvalConfig { gamma_shift: Some(half), ..cfg.clone() };
        let p = (e.kind == Kind::ParametrizedIdentity).then_some(5);
        let res = |c: &EvalConfig| -> Option<HPReal> {
            let ctx = NumCtx { cfg: c.clone(), conv, p };
            Some(&e.lhs.eval_numeric(&ctx).ok()?.0 - &e.rhs.eval_numeric(&ctx).ok()?.0)
        };
        match (res(&cfg), res(&shifted)) {
            (Some(a), Some(b)) => {
                checked += 1;
                let m = (&a - &b).abs().log10_abs();
                worst = worst.max(m);
                if m >= -(half as f64) + 5.0 {
                    gbad.push(e.id.clone());
                }
            }
            _ => gbad.push(format!("{} (error)", e.id)),
        }
    }
    ok &= gbad.is_empty();
    notes.push(format!("gamma shift: {checked} identities, worst log10 change {worst:.1}, violations {gbad:?}"));

    // tail bounds vs direct summation to 10^7 plus a remainder bracket
    type Case<'a> = (&'a str, Box<dyn Fn(&Running) -> f64>, Box<dyn Fn(&Running) -> (f64, f64)>);
    let cases: Vec<Case> = vec![
        ("H / k^3", Box::new(|r| r.h1.v() / r.k.powi(3)), Box::new(|r| power_rem(r.h1.v(), 3.0, 0.1))),
        ("H^3 / k^4", Box::new(|r| r.h1.v().powi(3) / r.k.powi(4)), Box::new(|r| power_rem(r.h1.v().powi(3), 4.0, 0.25))),
        ("H H[2] / k^4", Box::new(|r| r.h1.v() * r.h2.v() / r.k.powi(4)), Box::new(|r| {
            let (lo, hi) = power_rem(r.h1.v() * r.h2.v(), 4.0, 0.1);
            (lo, hi * 1.00001)
        })),
        ("h^2 / k^3", Box::new(|r| r.o1.v().powi(2) / r.k.powi(3)), Box::new(|r| power_rem(r.o1.v().powi(2), 3.0, 0.15))),
        ("H^2 / k^5", Box::new(|r| r.h1.v().powi(2) / r.k.powi(5)), Box::new(|r| power_rem(r.h1.v().powi(2), 5.0, 0.15))),
        ("S(H / k^2) / k^3", Box::new(|r| r.inner.v() / r.k.powi(3)), Box::new(|r| {
            let (lo, hi) = power_rem(r.inner.v(), 3.0, 0.0);
            (lo, hi * 1.00001)
        })),
    ];
    let mut tbad = Vec::new();
    let mut tchecked = 0;
    let mut tight = f64::NEG_INFINITY;
    for (src, f, rem) in &cases {
        let (lo, hi) = brute(f.as_ref(), N, rem.as_ref());
        let d = SumDescriptor::parse(src).unwrap();
        for (k, b) in [(16u64, 8u32), (24, 8), (50, 8), (16, 10), (50, 12)] {
            let cfg = EvalConfig { k, order: b, digits: 6, retry: false, ..EvalConfig::default() };
            let Ok(r) = evaluate_sum(&d, &cfg, None) else {
                tbad.push(format!("{src} K={k} B={b} (error)"));
                continue;
            };
            tchecked += 1;
            let v = r.value.to_f64();
            let bound = r.bound.to_f64();
            // f64 rounding of the oracle terms: about 1e-16 relative to the sum
            let slack = 4e-16 * v.abs();
            let err_lo = lo - v;
            let err_hi = v - hi;
            let dist = err_lo.max(err_hi).max(0.0);
            if dist > bound + slack {
                tbad.push(format!("{src} K={k} B={b}: off by {dist:e}, bound {bound:e}"));
            }
            // sharper: the engine at default settings as the reference
            let reference = evaluate_sum(&d, &EvalConfig::with_digits(40), None).unwrap();
            let true_err = (&r.value - &reference.value).abs();
            if true_err.cmp_value(&(&r.bound + &reference.bound)).is_gt() {
                tbad.push(format!("{src} K={k} B={b}: true error {} > bound {}", true_err.to_sci(3), r.bound.to_sci(3)));
            }
            if !true_err.is_zero() {
                tight = tight.max(true_err.log10_abs() - r.bound.log10_abs());
            }
        }
    }
    ok &= tbad.is_empty() && tchecked > 0;
    notes.push(format!(
        "tail bounds: {tchecked} cases vs brute force to 1e7, max log10(true error/bound) {tight:.1}, violations {tbad:?}"
    ));
    outcome(ok, notes.join("; "))
}

fn criterion7(opts: &VerifyOptions) -> Outcome {
    let cases = [
        ("h^3 / k^2", 5, "21/8*z2*z3"),
        ("h^3 / k^3", 6, "7/16*z3^2 + 135/128*z6"),
        ("h^3 / k^4", 7, "93/4*z2*z5 - 945/32*z3*z4"),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, w, want) in cases {
        let t = Instant::now();
        let cfg = DiscoverConfig { conv: opts.conventions.unwrap(), ..DiscoverConfig::default() };
        let got = discover(&SumDescriptor::parse(d).unwrap(), &zeta_basis(w), &cfg);
        let el = t.elapsed();
        let good = got.as_ref().is_ok_and(|cf| *cf == ClosedForm::parse(want).unwrap()) && el < Duration::from_secs(60);
        ok &= good;
        let shown = got.map(|c| c.to_string()).unwrap_or_else(|e| e.to_string());
        parts.push(format!("[{d}] = {shown} ({:.2} s)", el.as_secs_f64()));
    }
    outcome(ok, parts.join("; "))
}

fn criterion8(cat: &Catalog, opts: &VerifyOptions) -> Outcome {
    let t = Instant::now();
    let conv = opts.conventions.unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 328..=332 {
        let e = entry(cat, &format!("eq{n}"));
        let r = verify_entry(e, opts, conv);
        let d = delta_of(&r.delta);
        let good = r.verdict == Verdict::Pass && d < 1e-20;
        ok &= good;
        parts.push(format!("{} {:.1}{}", r.id, d.log10(), if good { "" } else { " FAIL" }));
    }
    let el = t.elapsed();
    ok &= el < Duration::from_secs(600);
    outcome(ok, format!("class C log10|delta|: {} in {:.1} s", parts.join(", "), el.as_secs_f64()))
}

#[test]
fn acceptance() {
    let cat = Catalog::builtin();
    let mut opts = VerifyOptions::default();
    let t = Instant::now();
    let choice = select_conventions(&cat, &opts);
    opts.conventions = Some(choice.conventions);
    println!("conventions: {} ({:?}, {:.1} s)", choice.conventions.describe(), choice.evidence, t.elapsed().as_secs_f64());
    // timed criteria start from empty caches
    let cold = |f: &dyn Fn() -> Outcome| {
        clear_caches();
        f()
    };
    let results = [
        criterion1(&cat),
        criterion2(&cat, &opts),
        cold(&|| criterion3(&cat, &opts)),
        cold(&|| criterion4(&cat, &opts)),
        criterion5(&cat, &opts),
        criterion6(&cat, &opts),
        cold(&|| criterion7(&opts)),
        cold(&|| criterion8(&cat, &opts)),
    ];
    for (i, r) in results.iter().enumerate() {
        println!("criterion {}: {} - {}", i + 1, if r.ok { "PASS" } else { "FAIL" }, r.detail);
    }
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, r)| !r.ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
