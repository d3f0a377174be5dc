//! Benchmarks for the hot paths: banded classification against the linear
//! scan it replaces, index construction, raw distance computation, and
//! feature extraction.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use emfv_bench::{sized_index, uniform_probes};
use emfv_core::oracle::linear_scan_classify;
use emfv_core::synthetic::colinear_banded_gallery;
use emfv_core::{l1_distance, BandedIndex, FeatureVector, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn classify(c: &mut Criterion) {
    let mut group = c.benchmark_group("classify");
    for &persons in &[64usize, 512, 4096] {
        let index = sized_index(persons, 4, 0xBE_EC ^ persons as u64);
        let top = index.bands().last().unwrap().high();
        let probes = uniform_probes(top * 1.2, 1024, persons as u64);
        group.bench_with_input(BenchmarkId::new("banded", persons), &probes, |b, probes| {
            b.iter(|| {
                for &d in probes {
                    black_box(index.classify_distance(black_box(d)));
                }
            })
        });
        group.bench_with_input(
            BenchmarkId::new("linear_scan", persons),
            &probes,
            |b, probes| {
                b.iter(|| {
                    for &d in probes {
                        black_box(linear_scan_classify(index.bands(), black_box(d), 0.0));
                    }
                })
            },
        );
    }
    group.finish();
}

fn build_index(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_index");
    group.sample_size(20);
    for &persons in &[64usize, 512] {
        let built = colinear_banded_gallery(&vec![2; persons], 4, persons as u64).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(persons),
            &built.gallery,
            |b, gallery| b.iter(|| BandedIndex::build(black_box(gallery), 0.0).unwrap()),
        );
    }
    group.finish();
}

fn distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("l1_distance");
    for &dim in &[16usize, 256] {
        let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
        let a = FeatureVector::new((0..dim).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        let b = FeatureVector::new((0..dim).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(dim),
            &(a, b),
            |bench, (a, b)| bench.iter(|| l1_distance(black_box(a), black_box(b)).unwrap()),
        );
    }
    group.finish();
}

fn extract(c: &mut Criterion) {
    let net = Network::desk_default(3);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pixels: Vec<f64> = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
    let input = Tensor::from_grayscale(&pixels, 16, 16).unwrap();
    c.bench_function("extract_features", |b| {
        b.iter(|| net.extract_features(black_box(&input)).unwrap())
    });
}

criterion_group!(benches, classify, build_index, distance, extract);
criterion_main!(benches);
