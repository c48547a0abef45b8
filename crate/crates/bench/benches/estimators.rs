use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stoloc_core::constants::{estimate_sigma, estimate_tau};
use stoloc_core::geometry::{gaussian_norm_monte_carlo, NormSpec};
use stoloc_core::{DistributionFamily, RngStream};

fn tau(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_tau");
    group.sample_size(10);
    for n in [3, 10, 30] {
        let fam = DistributionFamily::exponential(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| estimate_tau(&fam, 10_000, RngStream::root(2)).unwrap())
        });
    }
    group.finish();
}

fn sigma(c: &mut Criterion) {
    let fam = DistributionFamily::gaussian(8);
    let mut group = c.benchmark_group("estimate_sigma");
    group.sample_size(10);
    group.bench_function("gaussian_8_1e4", |b| b.iter(|| estimate_sigma(&fam, 10_000, RngStream::root(3)).unwrap()));
    group.finish();
}

fn gauges(c: &mut Criterion) {
    let mut group = c.benchmark_group("gaussian_norm_1e4");
    group.sample_size(10);
    for name in ["l1", "linf", "cube", "cross"] {
        let spec = NormSpec::from_name(name, 10).unwrap();
        group.bench_function(name, |b| b.iter(|| gaussian_norm_monte_carlo(&spec, 10_000, RngStream::root(4)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, tau, sigma, gauges);
criterion_main!(benches);
