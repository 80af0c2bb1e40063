use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use privalloc::alloc::{ila_params_stochastic, ila_private, ula_private_public_membership};
use privalloc::dp::{toeplitz_apply_direct, toeplitz_apply_fft};
use privalloc::{gini, gini_pairwise, seeded, Population};
use rand::Rng;

fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random_range(0.0..=1.0)).collect()
}

fn partial_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("toeplitz");
    for n in [256usize, 2048, 16384] {
        let z = uniform(n, 1);
        if n <= 2048 {
            group.bench_with_input(BenchmarkId::new("direct", n), &z, |b, z| b.iter(|| toeplitz_apply_direct(z)));
        }
        group.bench_with_input(BenchmarkId::new("fft", n), &z, |b, z| b.iter(|| toeplitz_apply_fft(z)));
    }
    group.finish();
}

fn allocation(c: &mut Criterion) {
    let mut group = c.benchmark_group("allocate");
    for p in [2000usize, 20000] {
        let pop = Population::new(uniform(p, 2), 50, 0.1).unwrap();
        let params = ila_params_stochastic(p, p / 4, 1.0, 0.1).unwrap();
        let mut rng = seeded(3);
        group.bench_with_input(BenchmarkId::new("ila_private", p), &pop, |b, pop| {
            b.iter(|| ila_private(pop, &params, &mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ula_public_membership", p), &pop, |b, pop| {
            b.iter(|| ula_private_public_membership(pop, p / 4, 1.0, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn inequality(c: &mut Criterion) {
    let mut group = c.benchmark_group("gini");
    let rho = uniform(1000, 4);
    group.bench_function("sorted", |b| b.iter(|| gini(&rho).unwrap()));
    group.bench_function("pairwise", |b| b.iter(|| gini_pairwise(&rho).unwrap()));
    group.finish();
}

criterion_group!(benches, partial_sums, allocation, inequality);
criterion_main!(benches);
