//! Benchmarks for the hot kernels: rasterization, decoding, elastic
//! distortion, morphology, and the combined augmentation.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use barview_core::augment::{
    augment_image, dilate, elastic_distort, AugmentConfig, StructuringElement,
};
use barview_core::layout::make_layout;
use barview_core::raster::{encode_png_bytes, rasterize};
use barview_core::rng::RngStream;
use barview_core::verify::decode;
use rand::Rng;

fn sample(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::from_root(seed).rng();
    (0..m).map(|_| rng.random()).collect()
}

fn bench_rasterize(c: &mut Criterion) {
    let layout = make_layout(9, 1, 224, 224, 0).unwrap();
    let x = sample(9, 1);
    c.bench_function("rasterize_9x1_224", |b| {
        b.iter(|| rasterize(black_box(&x), &layout).unwrap())
    });

    let layout40 = make_layout(40, 4, 224, 224, 0).unwrap();
    let x40 = sample(40, 2);
    c.bench_function("rasterize_40x4_224", |b| {
        b.iter(|| rasterize(black_box(&x40), &layout40).unwrap())
    });
}

fn bench_decode(c: &mut Criterion) {
    let layout = make_layout(9, 1, 224, 224, 0).unwrap();
    let img = rasterize(&sample(9, 3), &layout).unwrap();
    c.bench_function("decode_9x1_224", |b| {
        b.iter(|| decode(black_box(&img), &layout).unwrap())
    });
}

fn bench_augment(c: &mut Criterion) {
    let layout = make_layout(9, 1, 224, 224, 0).unwrap();
    let img = rasterize(&sample(9, 4), &layout).unwrap();

    c.bench_function("elastic_distort_224", |b| {
        b.iter(|| {
            let mut rng = RngStream::from_root(7).rng();
            elastic_distort(black_box(&img), 50.0, 4.0, &mut rng)
        })
    });

    let se = StructuringElement {
        height: 2,
        width: 5,
    };
    c.bench_function("dilate_2x5_224", |b| {
        b.iter(|| dilate(black_box(&img), &se))
    });

    let cfg = AugmentConfig::default();
    let stream = RngStream::from_root(9).child("augment").child_index(0);
    c.bench_function("augment_image_default_224", |b| {
        b.iter(|| augment_image(black_box(&img), &cfg, &stream))
    });
}

fn bench_png(c: &mut Criterion) {
    let layout = make_layout(9, 1, 224, 224, 0).unwrap();
    let img = rasterize(&sample(9, 5), &layout).unwrap();
    c.bench_function("encode_png_224", |b| {
        b.iter(|| encode_png_bytes(black_box(&img)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_rasterize,
    bench_decode,
    bench_augment,
    bench_png
);
criterion_main!(benches);
