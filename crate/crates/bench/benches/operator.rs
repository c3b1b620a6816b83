use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use onsager_degree::operator::{finite_rank_eval, gamma, gamma_quadrature, jacobian};
use onsager_degree::spectral::default_grid_size;
use onsager_degree::{onsager_kernel, OperatorContext, Pairing, SpectralFn};
use std::hint::black_box;

fn sample(n: usize, m: usize) -> SpectralFn {
    let c = (1..=n).map(|k| 0.8 / k as f64 * if k % 2 == 0 { -1.0 } else { 1.0 }).collect();
    SpectralFn::new(c, m).unwrap()
}

fn operator(c: &mut Criterion) {
    let kernel = onsager_kernel(64).unwrap();
    let mut g = c.benchmark_group("operator");
    for n in [8usize, 16, 32] {
        let m = default_grid_size(n);
        let ctx = OperatorContext::new(kernel.clone(), 6.0, n, m).unwrap();
        let u = sample(n, m);
        g.bench_with_input(BenchmarkId::new("gamma", n), &u, |b, u| b.iter(|| gamma(black_box(u), &ctx).unwrap()));
        g.bench_with_input(BenchmarkId::new("jacobian", n), &u, |b, u| {
            b.iter(|| jacobian(black_box(u), &ctx).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("finite_rank_eval", n), &u, |b, u| {
            b.iter(|| finite_rank_eval(black_box(u.coeffs()), &ctx, Pairing::X).unwrap())
        });
    }
    let ctx = OperatorContext::new(kernel, 6.0, 8, 256).unwrap();
    let u = sample(8, 256);
    g.bench_function("gamma_quadrature/8", |b| b.iter(|| gamma_quadrature(black_box(&u), &ctx).unwrap()));
    g.finish();
}

criterion_group!(benches, operator);
criterion_main!(benches);
