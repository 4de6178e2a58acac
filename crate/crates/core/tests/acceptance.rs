//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p xresp-core --test acceptance -- 2 5` runs a subset.
//! The process exits 0 after reporting, unless `XRESP_ACCEPTANCE_STRICT=1`
//! is set, in which case any FAIL makes it exit 1.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use xresp_core::fitting::{fit_points, power_law_eval, FitBounds};
use xresp_core::pipeline::{hash_outputs, run_pipeline, RunConfig, Stage};
use xresp_core::response::{
    active_correlator, active_response, averaged_lags, cross_response, market_average_response,
    market_response_matrix, noise_from_halves, passive_correlator, passive_response, response_day_sums, response_noise, sign_correlator,
    AveragingPolicy, CorrelatorDay, CurveGrid, CurveKind, LagCurve, LagSums, PairwiseEngine, ResponseDay,
    ResponseMatrix, MATRIX_LAGS,
};
use xresp_core::returns::MidpointSeries;
use xresp_core::synth::{ImpactLink, ImpactModel, Kernel, SignModel, SynthMarket, SynthSpec};
use xresp_core::universe::Universe;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const SLOTS: usize = 22_200;
const NZ: AveragingPolicy = AveragingPolicy::NonzeroSigns;

// 1 ---------------------------------------------------------------------

/// Largest `|a - b| / max(|b|, scale)` over a curve, or infinity on a
/// count or definedness mismatch.
fn curve_error(curve: &LagCurve, naive: impl Fn(usize) -> common::Naive) -> f64 {
    let mut worst = 0.0f64;
    for (k, &tau) in curve.lags.iter().enumerate() {
        let want = naive(tau as usize);
        if curve.counts[k] != want.count {
            return f64::INFINITY;
        }
        worst = worst.max(rel_error(curve.values[k], want.value, want.scale));
    }
    worst
}

fn rel_error(a: Option<f64>, b: Option<f64>, scale: f64) -> f64 {
    match (a, b) {
        (None, None) => 0.0,
        (Some(a), Some(b)) => {
            let d = b.abs().max(scale);
            if d == 0.0 { (a - b).abs() } else { (a - b).abs() / d }
        }
        _ => f64::INFINITY,
    }
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut noise_ok = true;

    let slots = 10_000;
    let raw = common::raw_market(2024, 2, 5, slots, 0.2);
    let mut lags: Vec<u32> = (1..=30).collect();
    lags.extend([100, 1000, 5000, 9999]);
    for (i, j) in [(0, 1), (1, 0), (1, 1)] {
        let pairs = common::common(&raw, i, j);
        let mids: Vec<_> = pairs
            .iter()
            .map(|(a, _)| MidpointSeries::from_values("I", common::date(0), a.prices.clone()).log_midpoints())
            .collect();
        let days: Vec<ResponseDay> = pairs
            .iter()
            .zip(&mids)
            .enumerate()
            .map(|(d, ((_, b), lm))| ResponseDay { label: d + 1, log_mid_i: lm, signs_j: &b.signs })
            .collect();
        let sign_days: Vec<CorrelatorDay> = pairs
            .iter()
            .enumerate()
            .map(|(d, (a, b))| CorrelatorDay { label: d + 1, signs_i: &a.signs, signs_j: &b.signs })
            .collect();
        for policy in [AveragingPolicy::NonzeroSigns, AveragingPolicy::AllSeconds] {
            let r = cross_response("I", "J", &days, &lags, policy).unwrap();
            worst = worst.max(curve_error(&r, |t| common::pair_response(&raw, i, j, t, policy)));
            let c = sign_correlator("I", "J", &sign_days, &lags, policy).unwrap();
            worst = worst.max(curve_error(&c, |t| common::pair_correlator(&raw, i, j, t, policy)));
            let nu = response_noise("I", "J", &days, &lags, policy).unwrap();
            for (k, &tau) in lags.iter().enumerate() {
                let want = common::pair_noise(&raw, i, j, tau as usize, policy);
                let pooled = common::pair_response(&raw, i, j, tau as usize, policy);
                noise_ok &= common::noise_close(nu.values[k], want, pooled, 1e-12);
            }
        }
    }

    let n = 4;
    let raw = common::raw_market(2025, n, 5, slots, 0.25);
    let symbols: Vec<String> = (0..n).map(|k| format!("S{k}")).collect();
    let lags = vec![1, 2, 60, 300, 1800, 7200];
    let mut engine = PairwiseEngine::new(symbols.clone(), slots, lags.clone(), lags.clone(), NZ).unwrap();
    engine.absorb_days(&common::to_market_days(&raw)).unwrap();
    let stats = engine.finish();
    let (response, correlator) = (stats.response(), stats.correlator());
    for (grid, is_response) in [(&response, true), (&correlator, false)] {
        for (k, &tau) in lags.iter().enumerate() {
            let tau = tau as usize;
            let naive = |i, j| {
                if is_response {
                    common::pair_response(&raw, i, j, tau, NZ)
                } else {
                    common::pair_correlator(&raw, i, j, tau, NZ)
                }
            };
            for i in 0..n {
                for j in 0..n {
                    let want = naive(i, j);
                    if grid.count(i, j, k) != want.count {
                        worst = f64::INFINITY;
                    }
                    worst = worst.max(rel_error(grid.value(i, j, k), want.value, want.scale));
                }
            }
            let m = common::pair_matrix(n, |i, j| naive(i, j).value);
            let scale = m.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            let market = market_average_response(grid).unwrap();
            worst = worst.max(rel_error(market.values[k], common::market(&m), scale));
            for s in 0..n {
                let (p, a) = if is_response {
                    (
                        passive_response(grid, &symbols[s], &symbols, "m").unwrap(),
                        active_response(grid, &symbols[s], &symbols, "m").unwrap(),
                    )
                } else {
                    (
                        passive_correlator(grid, &symbols[s], &symbols, "m").unwrap(),
                        active_correlator(grid, &symbols[s], &symbols, "m").unwrap(),
                    )
                };
                worst = worst.max(rel_error(p.values[k], common::passive(&m, s), scale));
                worst = worst.max(rel_error(a.values[k], common::active(&m, s), scale));
            }
        }
    }
    outcome(
        worst <= 1e-12 && noise_ok,
        format!("max relative error {worst:.2e} (limit 1e-12); noise within propagated bound: {noise_ok}"),
    )
}

// 2 ---------------------------------------------------------------------

/// (theta, tau0, gamma) of every fitted sign correlator in the two tables.
const TABLE_ROWS: [(f64, f64, f64); 14] = [
    (0.46, 0.05, 1.00),
    (0.04, 2.34, 1.15),
    (0.61, 0.06, 1.04),
    (0.45, 0.07, 1.00),
    (0.46, 0.03, 1.00),
    (0.49, 0.06, 1.00),
    (0.61, 0.04, 1.04),
    (1.18, 0.03, 1.06),
    (0.01, 0.47, 0.68),
    (0.03, 0.23, 0.92),
    (0.27, 0.06, 1.32),
    (0.02, 1.44, 0.90),
    (0.01, 1.31, 0.85),
    (0.02, 0.55, 0.71),
];

fn dense_grid() -> Vec<f64> {
    (1..=1000).map(|t| t as f64).collect()
}

fn fit_round_trip() -> Outcome {
    let x = dense_grid();
    let (mut worst_rel, mut worst_chi2) = (0.0f64, 0.0f64);
    for &(theta, tau0, gamma) in &TABLE_ROWS {
        let y: Vec<f64> = x.iter().map(|&t| power_law_eval(theta, tau0, gamma, t).unwrap()).collect();
        let f = fit_points(&x, &y, &FitBounds::default()).unwrap();
        for (got, want) in [(f.theta, theta), (f.tau0, tau0), (f.gamma, gamma)] {
            worst_rel = worst_rel.max((got / want - 1.0).abs());
        }
        worst_chi2 = worst_chi2.max(f.chi2);
    }
    outcome(
        worst_rel <= 1e-3 && worst_chi2 <= 1e-18,
        format!("14 rows: max relative parameter error {worst_rel:.2e} (limit 1e-3), max chi2 {worst_chi2:.2e} (limit 1e-18)"),
    )
}

// 3 ---------------------------------------------------------------------

fn noisy_recovery() -> Outcome {
    let x = dense_grid();
    let clean: Vec<f64> = x.iter().map(|&t| power_law_eval(0.45, 0.07, 1.0, t).unwrap()).collect();
    let noise = Normal::new(0.0, 0.005).unwrap();
    let mut gammas = Vec::with_capacity(100);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
        gammas.push(fit_points(&x, &y, &FitBounds::default()).unwrap().gamma);
    }
    let hits = gammas.iter().filter(|g| (*g - 1.0).abs() <= 0.1).count();
    gammas.sort_by(f64::total_cmp);
    outcome(
        hits >= 95,
        format!(
            "gamma within 0.1 of 1.00 in {hits}/100 seeds (need 95); gamma quantiles 5%={:.3} 50%={:.3} 95%={:.3}",
            gammas[5], gammas[50], gammas[95]
        ),
    )
}

// 4 ---------------------------------------------------------------------

fn zit_null() -> Outcome {
    let lags = averaged_lags();
    let mut worst = 1.0f64;
    let mut total = (0usize, 0usize);
    for seed in 0..10u64 {
        let market = SynthMarket::new(SynthSpec::null(seed, 2, 250, SLOTS)).unwrap();
        let mut engine = PairwiseEngine::new(market.symbols().to_vec(), SLOTS, lags.clone(), lags.clone(), NZ)
            .unwrap()
            .with_variance();
        for d in 0..250 {
            engine.absorb_day(&market.day(d).to_market_day()).unwrap();
        }
        let stats = engine.finish();
        let (r, c) = (stats.response(), stats.correlator());
        let (mut inside, mut all) = (0, 0);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..lags.len() {
                    for (v, se) in [
                        (r.value(i, j, k), stats.response_std_error(i, j, k)),
                        (c.value(i, j, k), stats.correlator_std_error(i, j, k)),
                    ] {
                        all += 1;
                        if let (Some(v), Some(se)) = (v, se) {
                            inside += (v.abs() < 4.0 * se) as usize;
                        }
                    }
                }
            }
        }
        worst = worst.min(inside as f64 / all as f64);
        total.0 += inside;
        total.1 += all;
    }
    outcome(
        worst >= 0.99,
        format!(
            "10 seeds x 4 pairs x 2 statistics x 34 lags: {}/{} inside 4 SE, worst seed {:.2}% (need 99%)",
            total.0,
            total.1,
            100.0 * worst
        ),
    )
}

// 5 ---------------------------------------------------------------------

fn impact_spec(seed: u64, n: usize, days: usize, slots: usize, amplitude: f64, kernel: Kernel) -> SynthSpec {
    SynthSpec {
        sign_model: SignModel::Iid { p_trade: 0.5, p_buy: 0.5 },
        impact_model: ImpactModel::Transient {
            links: vec![ImpactLink { driver: 0, driven: Vec::new(), amplitude, kernel }],
        },
        noise_sigma: 1e-4,
        ..SynthSpec::null(seed, n, days, slots)
    }
}

fn argmax(values: &[Option<f64>]) -> usize {
    (0..values.len())
        .filter(|&k| values[k].is_some())
        .max_by(|&a, &b| values[a].unwrap().total_cmp(&values[b].unwrap()))
        .expect("some defined value")
}

fn transient_shape() -> Outcome {
    let kernel = Kernel::RiseDecay { rise: 5.0, decay: 60.0, reversal: 0.6 };
    let lags = averaged_lags();
    let implied = kernel.implied_argmax(&lags).unwrap();
    let market = SynthMarket::new(impact_spec(5, 2, 250, SLOTS, 1e-4, kernel)).unwrap();
    let mut engine = PairwiseEngine::new(market.symbols().to_vec(), SLOTS, lags.clone(), vec![0], NZ)
        .unwrap()
        .with_variance();
    for d in 0..250 {
        engine.absorb_day(&market.day(d).to_market_day()).unwrap();
    }
    let stats = engine.finish();
    // Prices of stock 1 against the driver's trades.
    let curve = stats.response().curve(1, 0);
    let peak = argmax(&curve.values);
    let r_max = curve.values[peak].unwrap();
    let se = stats.response_std_error(1, 0, peak).unwrap();
    let tail: Vec<f64> = curve.values[lags.len() - 5..].iter().flatten().copied().collect();
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let rises = curve.values[..peak].windows(2).filter(|w| w[1] >= w[0]).count();
    let near = peak.abs_diff(implied) <= 2;
    let decays = tail_mean < r_max - 4.0 * se;
    outcome(
        near && decays && rises * 10 >= peak * 8,
        format!(
            "measured argmax tau={} vs kernel argmax tau={} ({} grid points apart, limit 2); peak {:.3e}, mean of last 5 lags {:.3e}; rising steps before peak {rises}/{peak}",
            lags[peak],
            lags[implied],
            peak.abs_diff(implied),
            r_max,
            tail_mean
        ),
    )
}

// 6 ---------------------------------------------------------------------

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn noise_identity_and_growth() -> Outcome {
    let mut lags: Vec<u32> = (1..=120).collect();
    lags.extend(500..=1000);

    // Identical halves: the same three days labelled odd and even.
    let market = SynthMarket::new(impact_spec(6, 2, 3, 4000, 5e-5, Kernel::Delta { lag: 3 })).unwrap();
    let mut half = LagSums::zeros(&lags);
    for d in market.days() {
        let lm = MidpointSeries::from_values("I", d.date, d.stocks[1].midpoints()).log_midpoints();
        response_day_sums(&lm, &d.stocks[0].signs, NZ, &mut half);
    }
    let nu = noise_from_halves("I", "J", &half, &half).unwrap();
    let defined = nu.values.iter().flatten().count();
    let exact = nu.values.iter().flatten().all(|&v| v == 0.0);

    // Weak transient signal over finitely many days.
    let kernel = Kernel::RiseDecay { rise: 5.0, decay: 60.0, reversal: 0.6 };
    let market = SynthMarket::new(impact_spec(66, 2, 60, SLOTS, 2.3e-5, kernel)).unwrap();
    let days: Vec<_> = market.days().collect();
    let mids: Vec<_> = days
        .iter()
        .map(|d| MidpointSeries::from_values("I", d.date, d.stocks[1].midpoints()).log_midpoints())
        .collect();
    let pair_days: Vec<ResponseDay> = days
        .iter()
        .zip(&mids)
        .enumerate()
        .map(|(k, (d, lm))| ResponseDay { label: k + 1, log_mid_i: lm, signs_j: &d.stocks[0].signs })
        .collect();
    let nu = response_noise("I", "J", &pair_days, &lags, NZ).unwrap();
    let pick = |lo: u32, hi: u32| {
        median(
            lags.iter()
                .zip(&nu.values)
                .filter(|(l, _)| (lo..=hi).contains(*l))
                .filter_map(|(_, v)| *v)
                .collect(),
        )
    };
    let (short, long) = (pick(1, 120), pick(500, 1000));
    outcome(
        exact && defined == lags.len() && long > short,
        format!(
            "identical halves: {defined}/{} lags defined, all exactly 0: {exact}; median noise 1-120 s {short:.4} < 500-1000 s {long:.4}",
            lags.len()
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn matrix_structure() -> Outcome {
    let (n, slots) = (10, 4000);
    let kernel = Kernel::RiseDecay { rise: 3.0, decay: 30.0, reversal: 0.5 };
    let market = SynthMarket::new(impact_spec(7, n, 20, slots, 1e-4, kernel)).unwrap();
    let lags: Vec<u32> = MATRIX_LAGS.iter().copied().filter(|&l| (l as usize) < slots).collect();
    let mut engine = PairwiseEngine::new(market.symbols().to_vec(), slots, lags.clone(), vec![0], NZ).unwrap();
    for d in market.days() {
        engine.absorb_day(&d.to_market_day()).unwrap();
    }
    let grid = engine.finish().response();
    let sectors: Vec<String> = (0..n).map(|k| if k < 5 { "A".into() } else { "B".into() }).collect();

    let mut unit = true;
    let mut worst_ratio = f64::INFINITY;
    for &tau in &lags {
        let m = ResponseMatrix::from_grid(&grid, tau, &sectors).unwrap();
        let max = m.normalized.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
        unit &= (max - 1.0).abs() < 1e-15;
        let driver = m.symbols.iter().position(|s| s == &market.symbols()[0]).unwrap();
        let column: Vec<f64> = (0..n).filter(|&i| i != driver).map(|i| m.normalized[[i, driver]]).collect();
        let off: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.normalized[[i, j]])
            .collect();
        let col_mean = column.iter().sum::<f64>() / column.len() as f64;
        let grand = off.iter().sum::<f64>() / off.len() as f64;
        worst_ratio = worst_ratio.min(col_mean / grand);
    }

    let mut prop_unit = true;
    let mut rng = common::seeded(77);
    for _ in 0..200 {
        let k = rng.random_range(1..8);
        let raw = random_matrix(k, &mut rng);
        let symbols: Vec<String> = (0..k).map(|s| format!("X{s}")).collect();
        let m = market_response_matrix(1, &symbols, &vec!["A".to_string(); k], &raw).unwrap();
        let max = m.normalized.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_unit &= max == 1.0;
    }
    outcome(
        unit && prop_unit && worst_ratio >= 3.0,
        format!(
            "max |entry| = 1 at all {} lags: {unit}, on 200 random matrices: {prop_unit}; driver column mean / off-diagonal mean >= {worst_ratio:.2} (need 3)",
            lags.len()
        ),
    )
}

fn random_matrix(k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut grid = CurveGrid::new(CurveKind::Response, (0..k).map(|s| format!("X{s}")).collect(), vec![1]).unwrap();
    for i in 0..k {
        for j in 0..k {
            grid.set_point(i, j, 0, Some(rng.random_range(-3.0..3.0)), 1);
        }
    }
    grid.slice_at(0)
}

// 8 ---------------------------------------------------------------------

fn determinism_config(out: &Path, jobs: usize) -> RunConfig {
    let kernel = Kernel::RiseDecay { rise: 3.0, decay: 30.0, reversal: 0.5 };
    let mut spec = impact_spec(8, 4, 12, 3000, 1e-4, kernel);
    spec.sign_model = SignModel::LatentFactor {
        p_trade: 0.5,
        target: xresp_core::synth::CorrelatorTarget { theta: 0.3, tau0: 0.5, gamma: 1.0 },
    };
    let mut c = RunConfig {
        out_dir: out.to_path_buf(),
        jobs,
        synth: Some(spec),
        grid: xresp_core::ingest::IntradayGrid::with_slots(3000).unwrap(),
        ..RunConfig::default()
    };
    c.lags.pair_max = 200;
    c.lags.averaged_max = 2000;
    c.lags.averaged_points = 20;
    c.lags.matrix = vec![1, 2, 60, 300];
    c.pairs = vec![["S000".into(), "S001".into()], ["S001".into(), "S000".into()]];
    c
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for (run, jobs) in [(0, 1), (1, 1), (2, 8), (3, 8)] {
        let out = tmp.path().join(format!("run{run}"));
        let m = run_pipeline(&determinism_config(&out, jobs)).unwrap();
        assert!(m.complete());
        let rel: Vec<_> = m.outputs.iter().map(|f| std::path::PathBuf::from(&f.path)).collect();
        assert_eq!(hash_outputs(&out, &rel).unwrap(), m.outputs);
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    let identical = trees.iter().all(|t| t == &trees[0]);
    outcome(
        identical && files > 20,
        format!("4 runs (jobs 1, 1, 8, 8): {files} files each, byte-identical: {identical}"),
    )
}

// 9 ---------------------------------------------------------------------

fn peak_rss_mib() -> Option<f64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

fn full_scale() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let roster = Universe::roster();
    let mut spec = SynthSpec::null(9, roster.len(), 250, SLOTS);
    spec.symbols = roster.symbols();
    spec.sign_model = SignModel::Iid { p_trade: 0.5, p_buy: 0.5 };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let config = RunConfig {
        out_dir: tmp.path().to_path_buf(),
        jobs,
        stages: vec![Stage::Matrix, Stage::Average],
        synth: Some(spec),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let manifest = run_pipeline(&config).unwrap();
    let elapsed = start.elapsed();
    let rss = peak_rss_mib().unwrap_or(f64::NAN);
    let pairs = fs::read_to_string(tmp.path().join("average/market_response.csv")).unwrap().lines().count() - 1;
    outcome(
        manifest.complete() && elapsed <= Duration::from_secs(600) && rss <= 8192.0 && pairs == 34,
        format!(
            "99 stocks x 250 days x {SLOTS} slots, 6 matrix lags + 34 averaged lags on {jobs} thread(s): {:.0} s (limit 600 s), peak RSS {rss:.0} MiB (limit 8192)",
            elapsed.as_secs_f64()
        ),
    )
}

// 10 --------------------------------------------------------------------

fn memory_flip() -> Outcome {
    // Short-memory correlators with very different crossover lags.
    let members: [(f64, f64, f64); 5] =
        [(0.45, 0.07, 1.00), (0.30, 0.5, 1.10), (0.20, 3.0, 1.05), (0.10, 20.0, 1.20), (0.05, 100.0, 1.00)];
    let x = dense_grid();
    let lags: Vec<u32> = (1..=1000).collect();
    let mut symbols = vec!["P".to_string()];
    symbols.extend((0..members.len()).map(|k| format!("Q{k}")));
    let mut grid = CurveGrid::new(CurveKind::SignCorrelator, symbols.clone(), lags.clone()).unwrap();
    let mut individual = Vec::new();
    for (m, &(theta, tau0, gamma)) in members.iter().enumerate() {
        let y: Vec<f64> = x.iter().map(|&t| power_law_eval(theta, tau0, gamma, t).unwrap()).collect();
        individual.push(fit_points(&x, &y, &FitBounds::default()).unwrap().gamma);
        for (k, v) in y.iter().enumerate() {
            grid.set_point(0, m + 1, k, Some(*v), 1);
        }
    }
    let avg = passive_correlator(&grid, "P", &symbols, "market").unwrap();
    let fit = xresp_core::fitting::fit_power_law(&avg, &FitBounds::default()).unwrap();
    let min = individual.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        individual.iter().all(|&g| g >= 1.0 - 1e-9) && fit.gamma < min,
        format!(
            "individual gammas {:?} (all >= 1), averaged correlator gamma {:.3} < min {:.3}",
            individual.iter().map(|g| (g * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            fit.gamma,
            min
        ),
    )
}

// -----------------------------------------------------------------------

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "fit round trip", fit_round_trip),
        (3, "noisy recovery", noisy_recovery),
        (4, "zero-intelligence null", zit_null),
        (5, "transient impact shape", transient_shape),
        (6, "response noise identity and growth", noise_identity_and_growth),
        (7, "matrix normalization and stripe", matrix_structure),
        (8, "determinism", determinism),
        (9, "full-scale performance", full_scale),
        (10, "short-to-long memory flip", memory_flip),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var("XRESP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    std::panic::set_hook(Box::new(|_| {}));

    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "{} {id:>2} {name}: {} [{:.1} s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
