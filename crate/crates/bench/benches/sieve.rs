use std::hint::black_box;
use std::sync::Arc;

use cayley_sieve::blocks::{kappa, DeltaPolicy, GeneratorOptions, GeneratorSystem, QuotientOrder};
use cayley_sieve::instances::{Instance, InstanceMode, InstanceSpec, Partition};
use cayley_sieve::spectral::{cayley_spectrum, AbelianGroup, LoopConvention};
use cayley_sieve::walk::{exact_block_distribution, FlatWalker, SiteLayout, WalkConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn coloring(r: u32) -> Instance {
    Instance::build(&InstanceSpec::Coloring {
        r,
        c: 3,
        partition: Partition::Triples,
        mode: InstanceMode::Permissive,
        zero_is_color: true,
    })
    .unwrap()
}

fn system(r: u32) -> Arc<GeneratorSystem> {
    let inst = coloring(r);
    let b: Vec<f64> = (1..=r).map(f64::from).collect();
    Arc::new(GeneratorSystem::build(inst.system().clone(), 0.5, &b, 1, &GeneratorOptions::default()).unwrap())
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectrum");
    for m in [3usize, 6, 9] {
        let g = AbelianGroup::elementary(3, m).unwrap();
        let n = g.order();
        let gens: Vec<usize> = (0..60).map(|i| (i * 7919 + 13) % n).collect();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &gens, |b, gens| {
            b.iter(|| cayley_spectrum(&g, black_box(gens), LoopConvention::Plain, usize::MAX).unwrap())
        });
    }
    group.finish();
}

fn walk_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("walk_steps");
    for r in [2u32, 12] {
        let gs = system(r);
        let cfg = WalkConfig::new(gs.clone(), 5).unwrap();
        let walker = FlatWalker::new(&cfg, SiteLayout::full(&gs));
        let steps = 10_000u64;
        group.throughput(Throughput::Elements(steps));
        group.bench_function(BenchmarkId::new("blocks", r), |b| {
            let mut trial = 0;
            b.iter(|| {
                trial += 1;
                let mut acc = 0u32;
                walker.run(trial, &[steps], |_, state| acc = state[0]).unwrap();
                black_box(acc)
            })
        });
    }
    group.finish();
}

fn exact_distribution(c: &mut Criterion) {
    let gs = system(2);
    let cfg = WalkConfig::new(gs, 0).unwrap();
    c.bench_function("exact_distribution/729", |b| {
        b.iter(|| exact_block_distribution(&cfg, &[1, 2], black_box(25)).unwrap())
    });
}

fn kappa_eval(c: &mut Criterion) {
    c.bench_function("kappa/2^104", |b| {
        b.iter(|| kappa(QuotientOrder::new(2, black_box(104)), 1.0, 0.5, DeltaPolicy::Strict).unwrap())
    });
}

criterion_group!(benches, spectrum, walk_steps, exact_distribution, kappa_eval);
criterion_main!(benches);
