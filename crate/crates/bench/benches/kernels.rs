use std::hint::black_box;

use cascade_core::bound::{exponent_ratio_table, per_hop_factor, DEFAULT_RATES};
use cascade_core::cone::{cone_angle_for_tail, q_at_angle, q_monte_carlo_at_angle};
use cascade_core::matrix::{optimal_convex_split, random_stochastic};
use cascade_core::rng;
use cascade_core::sim::{estimate_hop_matrix, make_code};
use cascade_core::{CodeKind, DecoderKind, FactorMethod};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn quadrature(c: &mut Criterion) {
    let mut g = c.benchmark_group("q_quadrature");
    for n in [2usize, 16, 64, 256] {
        let theta = cone_angle_for_tail(0.25, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| q_at_angle(black_box(theta), n, 4.0, 1e-12).unwrap())
        });
    }
    g.finish();
    c.bench_function("per_hop_factor N=64 R=0.5", |b| {
        b.iter(|| per_hop_factor(64, 0.5, black_box(4.0), FactorMethod::Quadrature).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let theta = cone_angle_for_tail(0.5, 8).unwrap();
    c.bench_function("q_monte_carlo N=8 100k", |b| {
        b.iter(|| q_monte_carlo_at_angle(theta, 8, 1.0, 100_000, black_box(1)).unwrap())
    });
    let code = make_code(CodeKind::RandomSphere, 16, 8, 1.0, 3).unwrap();
    c.bench_function("hop_matrix M=16 N=8 10k shots", |b| {
        b.iter(|| {
            estimate_hop_matrix(&code, DecoderKind::MaxLikelihood, 1.0, 10_000, black_box(2))
                .unwrap()
        })
    });
}

fn matrices(c: &mut Criterion) {
    let p = random_stochastic(16, &mut rng::stream(1, &[0]));
    c.bench_function("optimal_convex_split M=16", |b| {
        b.iter(|| optimal_convex_split(black_box(&p)))
    });
    let snr_db: Vec<f64> = (-10..=30).map(f64::from).collect();
    c.bench_function("exponent_ratio_table default grid", |b| {
        b.iter(|| exponent_ratio_table(black_box(&DEFAULT_RATES), &snr_db).unwrap())
    });
}

criterion_group!(benches, quadrature, monte_carlo, matrices);
criterion_main!(benches);
