use armas_bench::{bit_plane, byte_matrix, music_clip, regression_set};
use armas_core::baselines::{janssen_inpaint, JanssenConfig};
use armas_core::features::cwt_scalogram;
use armas_core::hcr::{dither, inverse_halftone};
use armas_core::regress::{rf_train, ForestConfig, GapSpec};
use armas_core::stego::{self_embed, EmbedOptions};
use armas_core::{synth, GaussianConfig, ScalogramConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn halftone(c: &mut Criterion) {
    let matrix = byte_matrix(512);
    c.bench_function("dither_512", |b| b.iter(|| dither(black_box(&matrix)).unwrap()));
    let plane = bit_plane(512);
    let cfg = GaussianConfig::default();
    c.bench_function("inverse_halftone_512", |b| b.iter(|| inverse_halftone(black_box(&plane), &cfg).unwrap()));
    let clip = music_clip(16000, 5.0);
    c.bench_function("self_embed_5s_16k", |b| b.iter(|| self_embed(black_box(&clip), &EmbedOptions::default()).unwrap()));
}

fn features(c: &mut Criterion) {
    let x = music_clip(16000, 1.0).to_f64();
    let cfg = ScalogramConfig::default();
    c.bench_function("cwt_1s_16k", |b| b.iter(|| cwt_scalogram(black_box(&x), 16000, &cfg).unwrap()));
}

fn regression(c: &mut Criterion) {
    let (x, y) = regression_set(5000, 24, 3);
    let cfg = ForestConfig { n_trees: 10, ..Default::default() };
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("rf_train_5000x24_10trees", |b| b.iter(|| rf_train(black_box(&x), &y, &cfg).unwrap()));
    group.finish();
}

fn inpainting(c: &mut Criterion) {
    let a = synth::ar_coefficients(&[(0.99995, 0.1), (0.99995, 0.35)]);
    let mut x = synth::ar_process(&a, 16000, 20000, 0);
    let gap = GapSpec::new(8000, 400);
    x[gap.range()].iter_mut().for_each(|v| *v = 0.0);
    let cfg = JanssenConfig { ar_order: Some(64), ..Default::default() };
    let mut group = c.benchmark_group("janssen");
    group.sample_size(10);
    group.bench_function("janssen_400_p64", |b| b.iter(|| janssen_inpaint(black_box(&x), gap, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, halftone, features, regression, inpainting);
criterion_main!(benches);
