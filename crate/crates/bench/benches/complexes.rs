use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use confmodels::cartan::verify_propagator;
use confmodels::homology::assemble_complex;
use confmodels::kontsevich::*;
use confmodels::manifold::*;
use confmodels::{canonical_form, GraphComb};
use confmodels_bench::pd_fixture;

fn enumeration(c: &mut Criterion) {
    c.bench_function("graphs_n basis n=2 arity 3 edges 4", |b| {
        b.iter(|| (0..=4).map(|m| graphs_n_by_size(2, 3, 4, m).len()).sum::<usize>())
    });
    c.bench_function("gc basis n=2 loop order 3", |b| b.iter(|| gc_basis(2, 3, 4).len()));
    let s2 = pd_fixture("s2");
    c.bench_function("graphs_m basis s2 arity 2 edges 3", |b| b.iter(|| graphs_m_basis(&s2, 2, 3, 2, 2).len()));
}

fn canonicalization(c: &mut Criterion) {
    let graphs: Vec<_> = (0..=3).flat_map(|m| graphs_n_by_size(3, 2, 5, m)).collect();
    c.bench_function("canonical_form n=3 arity 2 edges 5", |b| {
        b.iter(|| graphs.iter().map(|g| canonical_form(black_box(g)).1).sum::<i32>())
    });
}

fn differentials(c: &mut Criterion) {
    let graphs: Vec<_> = (0..=3).flat_map(|m| graphs_n_by_size(2, 3, 5, m)).collect();
    c.bench_function("d squared graphs_n n=2 arity 3 edges 5", |b| {
        b.iter(|| {
            graphs
                .iter()
                .filter(|g| {
                    let x = GraphComb::from_graph(g);
                    differential_graphs_n(&differential_graphs_n(&x).unwrap()).unwrap().is_zero()
                })
                .count()
        })
    });
    let s2 = pd_fixture("s2");
    let z = default_z();
    let basis = graphs_m_basis(&s2, 2, 3, 2, 2);
    c.bench_function("d squared graphs_m s2 arity 2 edges 3", |b| {
        b.iter(|| {
            basis
                .iter()
                .filter(|g| {
                    let x = GraphComb::from_graph(g);
                    differential_graphs_m(&s2, &z, &differential_graphs_m(&s2, &z, &x).unwrap()).unwrap().is_zero()
                })
                .count()
        })
    });
    c.bench_function("cocompose n=2 arity 3 edges 4", |b| {
        let xs: Vec<_> = (0..=3).flat_map(|m| graphs_n_by_size(2, 3, 4, m)).collect();
        b.iter(|| xs.iter().map(|g| cocompose(&GraphComb::from_graph(g), 0, 2).unwrap().len()).sum::<usize>())
    });
}

fn cohomology(c: &mut Criterion) {
    let mut group = c.benchmark_group("cohomology");
    group.sample_size(10);
    group.bench_function("graphs_n n=2 arity 3 loop order 0", |b| {
        b.iter(|| {
            let bases: BTreeMap<i32, _> = (-1..=3).map(|d| (d, graphs_n_basis(2, 3, 0, d))).collect();
            assemble_complex("graphs_n", 1, bases, contract_graph).unwrap().cohomology_table().unwrap()
        })
    });
    group.finish();
}

fn propagator(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagator");
    group.sample_size(10);
    for n in [3u8, 4] {
        group.bench_function(format!("verify n={n}"), |b| b.iter(|| verify_propagator(black_box(n))));
    }
    group.finish();
}

criterion_group!(benches, enumeration, canonicalization, differentials, cohomology, propagator);
criterion_main!(benches);
