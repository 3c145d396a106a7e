use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler_torus::actiongraph::ActionGraph;
use finsler_torus::entropy::{estimate_entropy_with, EntropyOptions};
use finsler_torus::mather::beta_table;
use finsler_torus::structure::periodic_family;
use finsler_torus::{par, MetricModel};
use std::hint::black_box;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn graph_build(c: &mut Criterion) {
    let m = MetricModel::bump();
    let mut g = c.benchmark_group("graph_build");
    g.sample_size(10);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "n24_s3"), |b| {
            par::set_sequential(seq);
            b.iter(|| black_box(ActionGraph::build(&m, 24, 3).unwrap()))
        });
    }
    g.finish();
}

fn beta(c: &mut Criterion) {
    let m = MetricModel::randers([0.5, 0.0]).unwrap();
    let graph = ActionGraph::build(&m, 16, 3).unwrap();
    let mut g = c.benchmark_group("beta_table");
    g.sample_size(10);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "q3"), |b| {
            par::set_sequential(seq);
            b.iter(|| black_box(beta_table(&graph, 3).unwrap()))
        });
    }
    g.finish();
}

fn family(c: &mut Criterion) {
    let m = MetricModel::bump();
    let mut g = c.benchmark_group("periodic_family");
    g.sample_size(10);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "seeds16"), |b| {
            par::set_sequential(seq);
            b.iter(|| black_box(periodic_family(&m, [1, 0], 16, 16).unwrap()))
        });
    }
    g.finish();
}

fn entropy(c: &mut Criterion) {
    let m = MetricModel::flat();
    let opt = EntropyOptions { bootstrap: 20, ..EntropyOptions::default() };
    let mut g = c.benchmark_group("entropy");
    g.sample_size(10);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new(name, "n1000_t20"), |b| {
            par::set_sequential(seq);
            b.iter(|| black_box(estimate_entropy_with(&m, 0.2, 20.0, 1000, 7, &opt).unwrap()))
        });
    }
    g.finish();
    par::set_sequential(false);
}

criterion_group!(benches, graph_build, beta, family, entropy);
criterion_main!(benches);
