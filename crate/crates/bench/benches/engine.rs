use criterion::{criterion_group, criterion_main, Criterion};

use eulersums::pslq::default_digits;
use eulersums::{
    clear_caches, discover, evaluate_sum, verify, zeta_basis, Catalog, DiscoverConfig, EvalConfig, SumDescriptor,
    VerifyOptions,
};

fn eval_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate_sum");
    g.sample_size(10);
    for text in ["H/k^3", "H^2 h/k^3", "alt H/k^4", "S(H/k^2)/k^3"] {
        let d = SumDescriptor::parse(text).unwrap();
        let cfg = EvalConfig::default();
        g.bench_function(text, |b| {
            b.iter(|| {
                clear_caches();
                evaluate_sum(&d, &cfg, None).unwrap()
            })
        });
    }
    g.finish();
}

fn verify_entries(c: &mut Criterion) {
    let cat = Catalog::builtin();
    let opts = VerifyOptions::default();
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    for id in ["eq124", "eq126", "eq328"] {
        g.bench_function(id, |b| {
            b.iter(|| {
                clear_caches();
                verify(&cat, id, &opts).unwrap()
            })
        });
    }
    g.finish();
}

fn discovery(c: &mut Criterion) {
    let basis = zeta_basis(5);
    let mut eval = EvalConfig::default();
    eval.digits = default_digits(basis.len() + 1);
    let cfg = DiscoverConfig { eval, digits: None, max_height: 1 << 20, conv: Default::default() };
    let d = SumDescriptor::parse("H/k^4").unwrap();
    let mut g = c.benchmark_group("discover");
    g.sample_size(10);
    g.bench_function("H/k^4 weight 5", |b| {
        b.iter(|| {
            clear_caches();
            discover(&d, &basis, &cfg).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, eval_sums, verify_entries, discovery);
criterion_main!(benches);
