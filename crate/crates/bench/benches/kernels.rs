use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use surveynet::metrics::weighted_auc;
use surveynet::numnet::{evaluate, LossKind, NetworkParams, Observations, Targets};
use surveynet::survey::WeightedEmpirical;

fn forward_backward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1024;
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
    let obs = Observations::new(&x, Targets::Classes { labels: &labels, class_count: 2 }, &w).unwrap();
    let mut group = c.benchmark_group("forward_backward");
    for hidden in [vec![16], vec![32, 16], vec![64, 32]] {
        let net = NetworkParams::init(5, &hidden, 2, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{hidden:?}")), &net, |b, net| {
            b.iter(|| evaluate(black_box(net), &obs, LossKind::WeightedCrossEntropy).unwrap())
        });
    }
    group.finish();
}

fn quantile(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("weighted_quantile");
    for n in [1_000, 10_000, 100_000] {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..50.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &(v, m), |b, (v, m)| {
            b.iter(|| WeightedEmpirical::new(black_box(v), m).unwrap().quantile(0.9).unwrap())
        });
    }
    group.finish();
}

fn auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("weighted_auc");
    for n in [1_000, 10_000, 100_000] {
        let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<u8> = s.iter().map(|p| u8::from(rng.random_bool(*p))).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..50.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &(s, y, w), |b, (s, y, w)| {
            b.iter(|| weighted_auc(black_box(s), y, w).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forward_backward, quantile, auc);
criterion_main!(benches);
