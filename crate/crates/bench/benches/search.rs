use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hybridrule::objective::{lb_corels, obj_pre};
use hybridrule::rules::{capture, equiv_groups};
use hybridrule::theory::{normalized_auc, BoundParams, Quadrature};
use hybridrule::{optimize, Mode, ObjectiveSpec, Policy, Prefix, SearchConfig};
use hybridrule_bench::{dataset, pool};

fn bench_capture(c: &mut Criterion) {
    let data = dataset(48_000, 40, 0.1, 1);
    let pool = pool(40, 300, 2);
    c.bench_function("capture_300_antecedents_48k_rows", |b| {
        b.iter(|| {
            for a in pool.antecedents() {
                black_box(capture(a, &data).unwrap());
            }
        })
    });
}

fn bench_bounds(c: &mut Criterion) {
    let data = dataset(48_000, 40, 0.1, 3);
    let groups = equiv_groups(&data);
    let pool = pool(40, 300, 4);
    let ants: Vec<_> = pool.antecedents().take(3).cloned().collect();
    let prefix = Prefix::from_antecedents(&ants, &data).unwrap();
    let next = pool.antecedents().nth(10).unwrap().clone();
    c.bench_function("extend_and_bound_48k_rows", |b| {
        b.iter(|| {
            let child = prefix.extend(black_box(&next), &data);
            let lb = lb_corels(&child, &groups, &data, 0.01);
            let obj = obj_pre(&child, &groups, &data, 0.01, 1e-5);
            black_box((lb.total(), obj.total()))
        })
    });
}

fn bench_search(c: &mut Criterion) {
    let data = dataset(2_000, 16, 0.2, 5);
    let groups = equiv_groups(&data);
    let pool = pool(16, 80, 6);
    let mut g = c.benchmark_group("optimize_pre_2k_rows_80_rules");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for policy in Policy::ALL {
        let mut cfg = SearchConfig::new(ObjectiveSpec::with_auto_beta(Mode::Pre, 1e-3, 0.5, data.n_rows()));
        cfg.policy = policy;
        cfg.max_length = 4;
        g.bench_with_input(BenchmarkId::from_parameter(policy), &cfg, |b, cfg| {
            b.iter(|| black_box(optimize(&data, &pool, &groups, None, cfg).unwrap().objective.total()))
        });
    }
    g.finish();
}

fn bench_theory(c: &mut Criterion) {
    let p = BoundParams::with_ratio((3.11e18f64).ln(), 100.0, 5000).unwrap();
    let q = Quadrature::default();
    c.bench_function("normalized_auc_4096_nodes", |b| {
        b.iter(|| black_box(normalized_auc(black_box(0.1), &p, &q).unwrap()))
    });
}

criterion_group!(benches, bench_capture, bench_bounds, bench_search, bench_theory);
criterion_main!(benches);
