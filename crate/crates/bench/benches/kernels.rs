//! Dense linear-algebra kernels: eigendecomposition, moment accumulation,
//! and the spectral semimetric.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use privmoment::matcore::{eig_sym, second_moment, spectral_dist};
use privmoment_bench::{gaussian_data, random_pd};

fn bench_eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_sym");
    for d in [8usize, 32, 96] {
        let m = random_pd(d, 17);
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |b, m| {
            b.iter(|| eig_sym(m).unwrap())
        });
    }
    group.finish();
}

fn bench_second_moment(c: &mut Criterion) {
    let mut group = c.benchmark_group("second_moment");
    for (d, n) in [(8usize, 20_000usize), (32, 20_000)] {
        let data = gaussian_data(d, n, 4.0, 23);
        let id = BenchmarkId::from_parameter(format!("d{d}_n{n}"));
        group.bench_with_input(id, &data, |b, data| b.iter(|| second_moment(data)));
    }
    group.finish();
}

fn bench_spectral_dist(c: &mut Criterion) {
    let a = random_pd(64, 5);
    let b_mat = random_pd(64, 6);
    c.bench_function("spectral_dist/d64", |b| {
        b.iter(|| spectral_dist(&a, &b_mat).unwrap())
    });
}

criterion_group!(kernels, bench_eig, bench_second_moment, bench_spectral_dist);
criterion_main!(kernels);
