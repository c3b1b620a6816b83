use criterion::{criterion_group, criterion_main, Criterion};
use onsager_degree::degree::default_radius;
use onsager_degree::{bifurcation_points, brouwer_degree, continue_branch, onsager_kernel};
use onsager_degree::{ContinuationConfig, MultistartConfig, OperatorContext};

fn degree(c: &mut Criterion) {
    let kernel = onsager_kernel(32).unwrap();
    let mut g = c.benchmark_group("degree");
    g.sample_size(10);
    for lambda in [1.0, 6.0] {
        let ctx = OperatorContext::new(kernel.clone(), lambda, 8, 256).unwrap();
        let r = default_radius(&ctx);
        let cfg = MultistartConfig::default();
        g.bench_function(format!("brouwer_degree/N=8/lambda={lambda}"), |b| {
            b.iter(|| brouwer_degree(&ctx, r, &cfg).unwrap())
        });
    }
    g.bench_function("bifurcation_points/lambda_max=30", |b| {
        b.iter(|| bifurcation_points(&kernel, 30.0).unwrap())
    });
    let ctx = OperatorContext::new(kernel.clone(), 0.0, 8, 256).unwrap();
    let l1 = kernel.lambda_n(1);
    g.bench_function("continue_branch/mode1", |b| {
        b.iter(|| continue_branch(&ctx, 1, 1, l1 + 3.0, &ContinuationConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, degree);
criterion_main!(benches);
