use std::hint::black_box;

use bifbm_core::estimators::{FunctionalDescriptor, FunctionalSet, Transform};
use bifbm_core::kernels::{gram_matrix, Comparison};
use bifbm_core::rng::derive_stream;
use bifbm_core::sampling::{cholesky_factor, Process, Sampler};
use bifbm_core::{KernelParams, TimeGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const ROWS: usize = 4096;

fn factorization(c: &mut Criterion) {
    let params = KernelParams::bifbm(0.5, 0.75).unwrap();
    let mut group = c.benchmark_group("factorization");
    for n in [128usize, 512] {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        group.bench_with_input(BenchmarkId::new("gram", n), &grid, |b, g| {
            b.iter(|| gram_matrix(black_box(g), &params).unwrap())
        });
        let gram = gram_matrix(&grid, &params).unwrap();
        group.bench_with_input(BenchmarkId::new("cholesky", n), &gram, |b, g| {
            b.iter(|| cholesky_factor(black_box(g), 0.0).unwrap())
        });
    }
    group.finish();
}

fn sample_blocks(c: &mut Criterion) {
    let params = KernelParams::bifbm(0.5, 0.75).unwrap();
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let cholesky = Sampler::prepare(&Process::Bifbm(params), &grid).unwrap();
    let circulant = Sampler::prepare(&Process::FbmScaled(Comparison::Y1.process(&params)), &grid).unwrap();

    let mut group = c.benchmark_group("block_n512");
    group.throughput(Throughput::Elements((ROWS * grid.columns()) as u64));
    group.sample_size(10);
    group.bench_function("cholesky", |b| {
        b.iter(|| cholesky.sample_block(derive_stream(1, 0), black_box(ROWS)))
    });
    group.bench_function("circulant", |b| {
        b.iter(|| circulant.sample_block(derive_stream(1, 0), black_box(ROWS)))
    });
    group.finish();
}

fn functionals(c: &mut Criterion) {
    let params = KernelParams::bifbm(0.5, 0.75).unwrap();
    let grid = TimeGrid::uniform(1.0, 512).unwrap();
    let sampler = Sampler::prepare(&Process::Bifbm(params), &grid).unwrap();
    let block = sampler.sample_block(derive_stream(2, 0), ROWS);
    let set = FunctionalSet::new(
        &grid,
        vec![
            FunctionalDescriptor::sup(),
            FunctionalDescriptor::sup_abs(),
            FunctionalDescriptor::sup_increment(),
            FunctionalDescriptor::sup().with_transform(Transform::Hinge { level: 0.5 }),
            FunctionalDescriptor::sup().with_transform(Transform::Moment { p: 2.0 }),
        ],
    )
    .unwrap();

    let mut group = c.benchmark_group("functionals_n512");
    group.throughput(Throughput::Elements(ROWS as u64));
    group.bench_function("five_per_row", |b| {
        let mut out = vec![0.0; set.len()];
        let mut scratch = Vec::new();
        b.iter(|| {
            for row in block.chunks_exact(grid.columns()) {
                set.evaluate_row(row, &mut out, &mut scratch).unwrap();
            }
            black_box(&out);
        })
    });
    group.finish();
}

criterion_group!(benches, factorization, sample_blocks, functionals);
criterion_main!(benches);
