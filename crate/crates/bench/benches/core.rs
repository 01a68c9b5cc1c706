use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smilescope_bench::{au12_series, logistic_problem, paired_samples, rating_labels};
use smilescope_core::learn::fit_logistic;
use smilescope_core::smile::{extract_candidates, gaussian_smooth, ExtractionParams};
use smilescope_core::stats::{fleiss_kappa, wilcoxon_signed_rank, RatingMatrix, WilcoxonMethod, WilcoxonOptions};
use smilescope_core::synth::{generate_corpus, SynthConfig};

fn extraction(c: &mut Criterion) {
    let params = ExtractionParams::default();
    let mut g = c.benchmark_group("extraction");
    for minutes in [1usize, 10, 30] {
        let x = au12_series(minutes * 60 * 30, 30.0, 7);
        g.bench_with_input(BenchmarkId::new("smooth", minutes), &x, |b, x| {
            b.iter(|| gaussian_smooth(black_box(x), params.sigma, 30.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("extract", minutes), &x, |b, x| {
            b.iter(|| extract_candidates(black_box(x), &params, 30.0).unwrap())
        });
    }
    g.finish();
}

fn agreement(c: &mut Criterion) {
    let mut g = c.benchmark_group("fleiss_kappa");
    for items in [100usize, 1_000, 10_000] {
        let m = RatingMatrix::from_labels(&rating_labels(items, 3, 4, 3), 4).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(items), &m, |b, m| b.iter(|| fleiss_kappa(black_box(m)).unwrap()));
    }
    g.finish();
}

fn wilcoxon(c: &mut Criterion) {
    let mut g = c.benchmark_group("wilcoxon");
    for (n, method) in [(20usize, WilcoxonMethod::Exact), (25, WilcoxonMethod::Exact), (500, WilcoxonMethod::Normal)] {
        let pairs = paired_samples(n, 5);
        let opts = WilcoxonOptions {
            method,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new(format!("{method:?}"), n), &pairs, |b, p| {
            b.iter(|| wilcoxon_signed_rank(black_box(p), opts).unwrap())
        });
    }
    g.finish();
}

fn logistic(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_logistic");
    g.sample_size(20);
    for (n, d) in [(500usize, 20usize), (2_000, 140)] {
        let (x, y) = logistic_problem(n, d, 11);
        g.bench_function(BenchmarkId::from_parameter(format!("{n}x{d}")), |b| {
            b.iter(|| fit_logistic(black_box(x.view()), &y, 1.0).unwrap())
        });
    }
    g.finish();
}

fn synth(c: &mut Criterion) {
    let mut g = c.benchmark_group("synth");
    g.sample_size(10);
    g.bench_function("default_config", |b| b.iter(|| generate_corpus(black_box(&SynthConfig::default())).unwrap()));
    g.finish();
}

criterion_group!(benches, extraction, agreement, wilcoxon, logistic, synth);
criterion_main!(benches);
