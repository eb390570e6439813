use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use triharm::dyadic_frame::{analyze_all, FrameKind};
use triharm::function_spaces::{hardy_norm, HardyContext, Method};
use triharm::grid::forward_transform;
use triharm::maximal::shifted_dyadic_max;
use triharm::multiplier::sobolev::ls2_norm;
use triharm::multiplier::{apply, apply_direct, MultiplierTensor, RandomBand, Symbol};
use triharm::surrogates::band_noise;
use triharm::{AnnularPartition, GridSpec, Kind, LpFamily};
use triharm_bench::{band_inputs, surrogates};

fn transforms(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform");
    for n in [1024usize, 16384] {
        let spec = GridSpec::new(1, n, 64.0).unwrap();
        let f = &band_inputs(spec, 1, 0).unwrap()[0];
        g.bench_with_input(BenchmarkId::new("forward_1d", n), f, |b, f| b.iter(|| forward_transform(black_box(f))));
    }
    let spec = GridSpec::new(2, 256, 32.0).unwrap();
    let f = &band_inputs(spec, 1, 0).unwrap()[0];
    g.bench_function("forward_2d_256", |b| b.iter(|| forward_transform(black_box(f))));
    g.finish();
}

fn littlewood_paley(c: &mut Criterion) {
    let spec = GridSpec::new(1, 4096, 256.0).unwrap();
    let fam = LpFamily::build(spec).unwrap();
    let f = &surrogates(spec, 1, 0).unwrap()[0];
    c.bench_function("lp_apply_all_4096", |b| b.iter(|| fam.apply_all(Kind::Psi, black_box(f)).unwrap()));
    c.bench_function("phi_analyze_all_4096", |b| {
        b.iter(|| analyze_all(&fam, black_box(f), FrameKind::Psi).unwrap())
    });
}

fn hardy(c: &mut Criterion) {
    let spec = GridSpec::new(1, 4096, 256.0).unwrap();
    let ctx = HardyContext::build(spec).unwrap();
    let f = &surrogates(spec, 1, 0).unwrap()[0];
    let mut g = c.benchmark_group("hardy_norm_4096");
    for m in [Method::Maximal, Method::Square, Method::GammaSup] {
        g.bench_function(m.name(), |b| b.iter(|| hardy_norm(black_box(f), 0.5, m, &ctx).unwrap()));
    }
    g.finish();
    c.bench_function("shifted_dyadic_max_4096", |b| b.iter(|| shifted_dyadic_max(black_box(f), [3, 0]).unwrap()));
}

fn multipliers(c: &mut Criterion) {
    let mut g = c.benchmark_group("trilinear");
    g.sample_size(10);
    let spec = GridSpec::new(1, 64, 8.0).unwrap();
    let f = band_inputs(spec, 3, 1).unwrap();
    let refs: Vec<_> = f.iter().collect();
    let rb = Symbol::RandomBand(Arc::new(RandomBand::new(3)));
    g.bench_function("sparse_random_band_64", |b| b.iter(|| apply(&rb, black_box(&refs)).unwrap()));
    let spec = GridSpec::new(1, 4096, 256.0).unwrap();
    let f = surrogates(spec, 3, 2).unwrap();
    let refs: Vec<_> = f.iter().collect();
    let one = Symbol::One.vanishing(0.5, &spec).unwrap();
    g.bench_function("product_vanishing_one_4096", |b| b.iter(|| apply(&one, black_box(&refs)).unwrap()));
    let spec = GridSpec::new(1, 32, 8.0).unwrap();
    // too coarse for a Littlewood-Paley family; plain band noise
    let f: Vec<_> = (0..3).map(|k| band_noise(spec, 0.25, 1.5, 4 + k).unwrap()).collect();
    let refs: Vec<_> = f.iter().collect();
    let t = MultiplierTensor::sample(&rb, spec, 3).unwrap();
    g.bench_function("direct_oracle_32", |b| b.iter(|| apply_direct(&t, black_box(&refs)).unwrap()));
    g.finish();
}

fn sobolev(c: &mut Criterion) {
    let mut g = c.benchmark_group("ls2_norm");
    g.sample_size(10);
    let spec = GridSpec::new(1, 256, 16.0).unwrap();
    for m in [1usize, 2, 3] {
        let part = AnnularPartition::build(spec, m).unwrap();
        g.bench_with_input(BenchmarkId::new("mihlin", m), &part, |b, part| {
            b.iter(|| ls2_norm(&Symbol::Mihlin(2.0), part, 1.5).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, transforms, littlewood_paley, hardy, multipliers, sobolev);
criterion_main!(benches);
