use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use xresp_bench::{date, market_day, trades};
use xresp_core::fitting::{fit_points, FitBounds};
use xresp_core::ingest::IntradayGrid;
use xresp_core::response::{
    averaged_lags, cross_response, dense_lags, AveragingPolicy, PairwiseEngine, ResponseDay, MATRIX_LAGS,
};
use xresp_core::signing::{sign_day, CarryPolicy};

const SLOTS: usize = 22_200;

fn signing(c: &mut Criterion) {
    let grid = IntradayGrid::default();
    let mut group = c.benchmark_group("sign_day");
    for n in [10_000usize, 100_000] {
        let t = trades(n, grid.open_second(), grid.slots() as u32);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| sign_day("X", date(), black_box(t), &grid, CarryPolicy::None))
        });
    }
    group.finish();
}

fn pair_response(c: &mut Criterion) {
    let day = market_day(2, SLOTS);
    let (i, j) = (day.stocks[0].as_ref().unwrap(), day.stocks[1].as_ref().unwrap());
    let lags = dense_lags(1000);
    let days = [ResponseDay { label: 1, log_mid_i: &i.log_mid, signs_j: &j.signs }];
    c.bench_function("cross_response/dense_1000_lags", |b| {
        b.iter(|| cross_response("I", "J", black_box(&days), &lags, AveragingPolicy::NonzeroSigns))
    });
}

fn engine(c: &mut Criterion) {
    let mut lags = averaged_lags();
    lags.extend(MATRIX_LAGS);
    lags.sort_unstable();
    lags.dedup();
    let mut group = c.benchmark_group("engine_day");
    group.sample_size(10);
    for n in [10usize, 30] {
        let day = market_day(n, SLOTS);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &day, |b, day| {
            b.iter(|| {
                let symbols = (0..n).map(|k| format!("S{k}")).collect();
                let mut e =
                    PairwiseEngine::new(symbols, SLOTS, lags.clone(), averaged_lags(), AveragingPolicy::NonzeroSigns)
                        .unwrap();
                e.absorb_day(black_box(day)).unwrap();
                e.finish()
            })
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let x: Vec<f64> = (1..=1000).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|t| 0.27 / (1.0 + (t / 0.06).powi(2)).powf(0.66)).collect();
    let bounds = FitBounds::default();
    c.bench_function("fit_points/1000", |b| b.iter(|| fit_points(black_box(&x), black_box(&y), &bounds)));
}

criterion_group!(benches, signing, pair_response, engine, fit);
criterion_main!(benches);
