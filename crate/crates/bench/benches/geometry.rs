use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sclkit::actions::{build_projection_family, scl_pipeline, wwpd_xi, Budgets};
use sclkit::classifier::{qm_dimension, scl_verdict, single};
use sclkit::{Backend, QuasiMorphism, TreeCountingQm, Word};
use sclkit_bench::{decompositions, quasi_tree, words};

fn graphs(c: &mut Criterion) {
    let mut group = c.benchmark_group("quasi_tree");
    group.sample_size(10);
    for n in [200, 800, 2000] {
        let g = quasi_tree(n, 0);
        group.bench_with_input(BenchmarkId::new("bottleneck", n), &g, |b, g| b.iter(|| g.bottleneck_constant()));
        group.bench_with_input(BenchmarkId::new("delta", n), &g, |b, g| b.iter(|| g.hyperbolicity_delta()));
        group.bench_with_input(BenchmarkId::new("manning", n), &g, |b, g| b.iter(|| g.manning_tree(None, 0).unwrap()));
    }
    group.finish();
}

fn counting(c: &mut Criterion) {
    let w = Word::parse("abAB", Some(2)).unwrap();
    let qm = TreeCountingQm::new(w, Word::identity(2)).unwrap();
    let inputs = words(2, 200, 64, 1);
    c.bench_function("counting/value_len200", |b| {
        b.iter(|| inputs.iter().map(|x| qm.value(black_box(x))).sum::<i64>())
    });
}

fn actions(c: &mut Criterion) {
    let backend = Backend::CayleyTree { rank: 2 };
    let g = Word::parse("abAB", Some(2)).unwrap();
    let mut group = c.benchmark_group("actions");
    group.sample_size(20);
    group.bench_function("wwpd_radius2", |b| b.iter(|| wwpd_xi(&backend, &g, 2).unwrap()));
    group.bench_function("projection_family", |b| b.iter(|| build_projection_family(&backend, &g, 2, None).unwrap()));
    group.bench_function("pipeline_abAB", |b| b.iter(|| scl_pipeline(&backend, &g, &Budgets::default()).unwrap()));
    group.finish();
}

fn classifier(c: &mut Criterion) {
    let ds = decompositions(200, 3);
    c.bench_function("classifier/verdicts", |b| b.iter(|| ds.iter().filter(|d| scl_verdict(d).is_positive()).count()));
    let chains: Vec<_> = ds.iter().take(40).map(single).collect();
    c.bench_function("classifier/dimension40", |b| b.iter(|| qm_dimension(black_box(&chains))));
}

criterion_group!(benches, graphs, counting, actions, classifier);
criterion_main!(benches);
