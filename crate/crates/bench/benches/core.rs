use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sca_core::manifold::{project_tangent, retract};
use sca_core::optimizer::{initial_point, ProductObjective};
use sca_core::*;

fn randn(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
}

/// Scaled and expanded data for `n` variables and `m` samples.
fn expanded(n: usize, m: usize) -> ExpandedMatrix {
    let x = DataMatrix::new(randn(1, n, m)).unwrap();
    let z = apply_scaler(&fit_scaler(&x).unwrap(), &x).unwrap();
    expand_second_order(&z).unwrap()
}

fn objective(c: &mut Criterion) {
    let mut g = c.benchmark_group("objective");
    g.sample_size(20);
    for n in [10, 52] {
        let data = expanded(n, 500);
        let cost = ReconstructionCost::new(data.values(), Activations::default());
        let point = initial_point(data.dim(), 27.min(data.dim()), 0).unwrap();
        g.bench_function(format!("cost_n{n}"), |b| b.iter(|| cost.cost(&point).unwrap()));
        g.bench_function(format!("cost_and_grad_n{n}"), |b| {
            b.iter(|| cost.cost_and_grad(&point).unwrap())
        });
    }
    g.bench_function("expand_n52", |b| {
        let x = DataMatrix::new(randn(2, 52, 500)).unwrap();
        b.iter(|| expand_second_order(&x).unwrap())
    });
    g.finish();
}

fn manifold(c: &mut Criterion) {
    let mut g = c.benchmark_group("manifold");
    for (n, p) in [(50, 5), (2757, 27)] {
        let base = StiefelPoint::from_qr(&randn(3, n, p)).unwrap();
        let h = project_tangent(&base, &randn(4, n, p)).unwrap();
        g.bench_function(format!("project_{n}x{p}"), |b| {
            let z = randn(5, n, p);
            b.iter(|| project_tangent(&base, &z).unwrap())
        });
        g.bench_function(format!("retract_{n}x{p}"), |b| b.iter(|| retract(&base, &h, 0.5).unwrap()));
    }
    g.finish();
}

fn optimizer(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimizer");
    g.sample_size(10);
    let data = expanded(3, 500);
    let cost = ReconstructionCost::new(data.values(), Activations::default());
    let cfg = CgConfig {
        max_iters: 50,
        grad_tol: 0.0,
        ..CgConfig::default()
    };
    g.bench_function("cg_50_iters_toy", |b| {
        b.iter_batched(
            || initial_point(data.dim(), 2, 0).unwrap(),
            |init| cg_optimize(&cost, init, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn limit(c: &mut Criterion) {
    let mut g = c.benchmark_group("control_limit");
    for m in [500, 5000] {
        let t2: Vec<f64> = randn(6, 1, m).iter().map(|v| v * v).collect();
        g.bench_function(format!("kde_m{m}"), |b| {
            b.iter(|| control_limit(&t2, 0.01, LimitRule::Coverage).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, objective, manifold, optimizer, limit);
criterion_main!(benches);
