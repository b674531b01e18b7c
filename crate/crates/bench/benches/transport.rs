use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use entlab_bench::gaussian_grid;
use entlab_core::transport::{sinkhorn_constrained, sinkhorn_solve, w2_exact_1d};

fn sinkhorn(c: &mut Criterion) {
    let mut g = c.benchmark_group("sinkhorn");
    g.sample_size(10);
    for n in [256, 1024] {
        let p = gaussian_grid(0.0, 1.0, n);
        let q = gaussian_grid(0.5, 2.0, n);
        g.bench_with_input(BenchmarkId::new("fixed_eps", n), &n, |b, _| {
            b.iter(|| sinkhorn_solve(&p, &q, 0.5, 1e-9, 10_000).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("constrained_ln2", n), &n, |b, _| {
            b.iter(|| sinkhorn_constrained(&p, &q, 2f64.ln(), 1e-9).unwrap())
        });
    }
    g.finish();
}

fn exact(c: &mut Criterion) {
    let p = gaussian_grid(0.0, 1.0, 4096);
    let q = gaussian_grid(1.0, 4.0, 4096);
    c.bench_function("w2_exact_1d/4096", |b| b.iter(|| w2_exact_1d(&p, &q)));
}

criterion_group!(benches, sinkhorn, exact);
criterion_main!(benches);
