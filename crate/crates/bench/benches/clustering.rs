use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use oodbsim::engine::stream;
use oodbsim::{make_policy, ObjectGraph, PageStore, PolicyKind, SimConfig};

fn initial_load(c: &mut Criterion) {
    let mut group = c.benchmark_group("load");
    for policy in PolicyKind::ALL {
        let config = SimConfig::default().with_policy(policy);
        let graph = ObjectGraph::generate(&config, &mut stream(config.seed, 1)).unwrap();
        group.bench_function(policy.as_str(), |b| {
            b.iter_batched(
                || (graph.clone(), PageStore::from_config(&config), make_policy(&config).unwrap()),
                |(mut g, mut s, mut p)| p.load(&mut g, &mut s, &config).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn recluster(c: &mut Criterion) {
    let mut group = c.benchmark_group("recluster");
    for policy in [PolicyKind::Cactis, PolicyKind::Orion] {
        let config = SimConfig::default().with_policy(policy);
        let graph = ObjectGraph::generate(&config, &mut stream(config.seed, 1)).unwrap();
        group.bench_function(policy.as_str(), |b| {
            b.iter_batched(
                || {
                    let mut p = make_policy(&config).unwrap();
                    let mut g = graph.clone();
                    let mut s = PageStore::from_config(&config);
                    p.load(&mut g, &mut s, &config).unwrap();
                    s.settle();
                    (g, s, p)
                },
                |(mut g, mut s, mut p)| p.on_recluster(&mut g, &mut s, &config).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, initial_load, recluster);
criterion_main!(benches);
