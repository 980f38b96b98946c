//! Benchmarks for the hot paths: the relaxation kernel, a full simulation,
//! region grouping, and bulk merging.

use std::hint::black_box;

use carrierseg_core::{
    closed_form_balance, group_regions, make_test_image, merge_to_target, sign_map, simulate,
    step, CarrierGrid, GrayImage, Partition, SignMap, Sign, SimParams, TestImageKind,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for size in [64usize, 256] {
        let img = make_test_image(TestImageKind::TwoHalves, size, size).unwrap();
        let params = SimParams::default();
        // A mid-run state, so the kernel sees realistic nonzero carriers.
        let mut grid = CarrierGrid::zeros(size, size);
        for _ in 0..10 {
            grid = step(&grid, &img, &params).0;
        }
        group.bench_function(format!("{size}x{size}"), |b| {
            b.iter(|| step(black_box(&grid), black_box(&img), &params))
        });
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let img = make_test_image(TestImageKind::TwoHalves, 64, 64).unwrap();
    let params = SimParams::default();
    c.bench_function("simulate/TwoHalves-64x64", |b| {
        b.iter(|| simulate(black_box(&img), &params).unwrap())
    });
}

fn balance_signs(img: &GrayImage) -> SignMap {
    sign_map(&closed_form_balance(img, 0.05, 0.2), 0.0)
}

fn bench_group(c: &mut Criterion) {
    let img = make_test_image(TestImageKind::ThreeShapes, 96, 96).unwrap();
    let signs = balance_signs(&img);
    c.bench_function("group_regions/ThreeShapes-96x96", |b| {
        b.iter(|| group_regions(black_box(&signs), black_box(&img)).unwrap())
    });
}

/// A 64x64 checkerboard of alternating signs: every pixel is its own region
/// (4096 of them), with varied intensities so merge priorities are distinct.
fn many_region_partition() -> (GrayImage, Partition) {
    let size = 64usize;
    let img = GrayImage::from_fn(size, size, |x, y| ((x * 31 + y * 17) % 256) as f64 / 255.0)
        .unwrap();
    let signs = SignMap::new(
        size,
        size,
        (0..size * size)
            .map(|idx| {
                if (idx % size + idx / size).is_multiple_of(2) {
                    Sign::Positive
                } else {
                    Sign::Negative
                }
            })
            .collect(),
    )
    .unwrap();
    let partition = group_regions(&signs, &img).unwrap();
    assert_eq!(partition.region_count(), size * size);
    (img, partition)
}

fn bench_merge(c: &mut Criterion) {
    let (_img, partition) = many_region_partition();
    c.bench_function("merge_to_target/4096-to-10", |b| {
        b.iter(|| merge_to_target(black_box(&partition), 10))
    });
}

criterion_group!(benches, bench_step, bench_simulate, bench_group, bench_merge);
criterion_main!(benches);
