use criterion::{criterion_group, criterion_main, Criterion};
use entlab_bench::{gaussian_grid, mixture};
use entlab_core::deconv::{c_term, deconvolve_scaled_copy, Strategy};
use entlab_core::DistSpec;

fn deconvolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("deconvolution");
    g.sample_size(10);
    let y = gaussian_grid(0.0, 1.0, 4096);
    g.bench_function("scaled_copy_grid/4096", |b| b.iter(|| deconvolve_scaled_copy(&y, 0.6).unwrap()));
    let gauss = DistSpec::gaussian(0.0, 1.0).unwrap();
    g.bench_function("c_term_gaussian", |b| b.iter(|| c_term(&gauss, 1.0, Strategy::ScaledCopy).unwrap()));
    let cauchy = DistSpec::cauchy(0.0, 1.0).unwrap();
    g.bench_function("c_term_cauchy", |b| b.iter(|| c_term(&cauchy, 1.0, Strategy::ScaledCopy).unwrap()));
    let mix = mixture();
    g.bench_function("c_term_mixture_noise", |b| b.iter(|| c_term(&mix, 2.0, Strategy::GaussianNoise).unwrap()));
    g.finish();
}

criterion_group!(benches, deconvolution);
criterion_main!(benches);
