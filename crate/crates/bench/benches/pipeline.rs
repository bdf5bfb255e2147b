use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use isim_forge::bundle::export_bundle;
use isim_forge::isim::{decode_isim, render_isim};
use isim_forge::layout::{sample_layout, SamplerConfig};
use isim_forge::scdkg::{fit_scdkg, FitConfig};
use isim_forge_bench::{bench_graph_and_layout, structured_dataset};

fn bench_fit(c: &mut Criterion) {
    let dataset = structured_dataset(1000, 3);
    c.bench_function("fit_scdkg_1000_images", |b| {
        b.iter(|| fit_scdkg(black_box(&dataset), &FitConfig::default()).unwrap())
    });
}

fn bench_sample(c: &mut Criterion) {
    let (graph, _) = bench_graph_and_layout();
    let cfg = SamplerConfig::default();
    let mut seed = 0u64;
    c.bench_function("sample_layout_800", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            sample_layout(black_box(&graph), (800, 800), seed, &cfg).unwrap()
        })
    });
}

fn bench_render_decode(c: &mut Criterion) {
    let (_, layout) = bench_graph_and_layout();
    c.bench_function("render_isim_800", |b| {
        b.iter(|| render_isim(black_box(&layout)).unwrap())
    });
    let raster = render_isim(&layout).unwrap();
    c.bench_function("decode_isim_800", |b| {
        b.iter(|| decode_isim(black_box(&raster), layout.class_count).unwrap())
    });
}

fn bench_export(c: &mut Criterion) {
    let (_, layout) = bench_graph_and_layout();
    let dir = std::env::temp_dir().join("isim-forge-bench-export");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    c.bench_function("export_bundle_800", |b| {
        b.iter(|| export_bundle(black_box(&layout), &dir, 0, true).unwrap())
    });
    let _ = std::fs::remove_dir_all(&dir);
}

criterion_group!(benches, bench_fit, bench_sample, bench_render_decode, bench_export);
criterion_main!(benches);
