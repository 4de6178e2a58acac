//! One streaming pass over the sessions, then the requested outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Stage};
use super::heatmap::emit_heatmap_data;
use super::manifest::{hash_inputs, hash_outputs, slash_path, Manifest, StageRecord, StageStatus};
use super::source::{FileSource, MarketSource, SourceDay, SynthSource};
use crate::error::{Error, Result};
use crate::fitting::{fit_power_law, FitResult};
use crate::response::{
    active_correlator, active_response, correlator_day_sums, market_average_response, noise_from_halves,
    normalize_per_lag, passive_correlator, passive_response, rank_by_response, response_day_sums,
    AveragingPolicy, CurveFlag, CurveGrid, CurveKind, LagCurve, LagSums, MarketDay, PairwiseEngine,
    PairwiseStats, ResponseMatrix,
};
use crate::signing::SignCounts;
use crate::synth::SynthMarket;
use crate::universe::Universe;

/// Sums of one ordered pair on the dense lag grid.
#[derive(Debug, Clone)]
pub struct PairSums {
    pub stock_i: String,
    pub stock_j: String,
    i: usize,
    j: usize,
    /// Common days seen so far; odd labels go to `odd`.
    pub days: usize,
    pub odd: LagSums,
    pub even: LagSums,
    pub correlator: LagSums,
}

impl PairSums {
    fn new(symbols: &[String], i: usize, j: usize, lags: &[u32]) -> Self {
        PairSums {
            stock_i: symbols[i].clone(),
            stock_j: symbols[j].clone(),
            i,
            j,
            days: 0,
            odd: LagSums::zeros(lags),
            even: LagSums::zeros(lags),
            correlator: LagSums::zeros(lags),
        }
    }

    fn absorb(&mut self, response: &LagSums, correlator: &LagSums) {
        self.days += 1;
        if self.days % 2 == 1 {
            self.odd.merge(response);
        } else {
            self.even.merge(response);
        }
        self.correlator.merge(correlator);
    }

    fn flagged(&self, mut c: LagCurve) -> LagCurve {
        if self.days == 0 {
            c.flag = Some(CurveFlag::NoCommonDays);
        }
        c
    }

    pub fn response(&self) -> LagCurve {
        let mut all = self.odd.clone();
        all.merge(&self.even);
        self.flagged(all.into_curve(CurveKind::Response, &self.stock_i, &self.stock_j))
    }

    pub fn correlator(&self) -> LagCurve {
        self.flagged(self.correlator.clone().into_curve(CurveKind::SignCorrelator, &self.stock_i, &self.stock_j))
    }

    pub fn noise(&self) -> Result<LagCurve> {
        if self.days < 2 {
            return Err(Error::TooFewDays(self.days));
        }
        noise_from_halves(&self.stock_i, &self.stock_j, &self.odd, &self.even)
    }

    fn file_name(&self) -> String {
        format!("{}_{}.csv", self.stock_i, self.stock_j)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignRow {
    pub symbol: String,
    pub date: NaiveDate,
    pub buy_seconds: usize,
    pub sell_seconds: usize,
    pub zero_seconds: usize,
    pub undefined_prefix: usize,
}

impl SignRow {
    fn new(symbol: &str, date: NaiveDate, c: &SignCounts) -> Self {
        SignRow {
            symbol: symbol.to_string(),
            date,
            buy_seconds: c.buy_seconds,
            sell_seconds: c.sell_seconds,
            zero_seconds: c.zero_seconds,
            undefined_prefix: c.undefined_prefix,
        }
    }
}

/// Everything the pass over the sessions collects.
#[derive(Debug, Clone)]
pub struct PassOutput {
    pub universe: Universe,
    pub sign_rows: Vec<SignRow>,
    pub pairs: Vec<PairSums>,
    pub stats: Option<PairwiseStats>,
}

/// What the pass has to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassNeeds {
    pub signs: bool,
    pub pairs: bool,
    pub all_pairs: bool,
}

impl PassNeeds {
    pub fn for_stages(stages: &[Stage], n_stocks: usize) -> Self {
        let has = |s: Stage| stages.contains(&s);
        PassNeeds {
            signs: has(Stage::Signs),
            pairs: [Stage::Respond, Stage::Correlate, Stage::Noise, Stage::Fit].into_iter().any(has),
            all_pairs: stages.iter().any(|s| s.needs_all_pairs()) || (has(Stage::Fit) && n_stocks >= 2),
        }
    }
}

/// The pairs a run analyses individually: the configured ones, or the
/// first two stocks in both orders when none are configured.
pub fn resolve_pairs(config: &RunConfig, universe: &Universe) -> Result<Vec<(usize, usize)>> {
    if config.pairs.is_empty() {
        return Ok(if universe.len() >= 2 { vec![(0, 1), (1, 0)] } else { Vec::new() });
    }
    config
        .pairs
        .iter()
        .map(|[a, b]| Ok((universe.index_of(a)?, universe.index_of(b)?)))
        .collect()
}

fn project(day: SourceDay, idx: &[usize]) -> SourceDay {
    if idx.iter().enumerate().all(|(a, &b)| a == b) && idx.len() == day.counts.len() {
        return day;
    }
    let SourceDay { market, counts } = day;
    let mut stocks: Vec<_> = market.stocks.into_iter().map(Some).collect();
    SourceDay {
        market: MarketDay {
            date: market.date,
            stocks: idx.iter().map(|&k| stocks[k].take().flatten()).collect(),
        },
        counts: idx.iter().map(|&k| counts[k]).collect(),
    }
}

fn pair_day(day: &MarketDay, i: usize, j: usize, lags: &[u32], policy: AveragingPolicy) -> Option<(LagSums, LagSums)> {
    let (si, sj) = (day.stocks[i].as_ref()?, day.stocks[j].as_ref()?);
    let mut response = LagSums::zeros(lags);
    let mut correlator = LagSums::zeros(lags);
    response_day_sums(&si.log_mid, &sj.signs, policy, &mut response);
    correlator_day_sums(&si.signs, &sj.signs, policy, &mut correlator);
    Some((response, correlator))
}

/// Reads every session once, in date order, feeding the pair sums and the
/// all-pairs engine. Sessions are produced and reduced in parallel batches
/// whose results are merged in date order.
pub fn collect(config: &RunConfig, universe: &Universe, source: &dyn MarketSource, needs: PassNeeds) -> Result<PassOutput> {
    let symbols = universe.symbols();
    let idx: Vec<usize> = symbols
        .iter()
        .map(|s| {
            source
                .symbols()
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::UnknownSymbol(s.clone()))
        })
        .collect::<Result<_>>()?;
    let policy = config.averaging_policy;
    let pair_lags = config.lags.pair_lags();
    let mut pairs: Vec<PairSums> = if needs.pairs {
        resolve_pairs(config, universe)?
            .into_iter()
            .map(|(i, j)| PairSums::new(&symbols, i, j, &pair_lags))
            .collect()
    } else {
        Vec::new()
    };
    let mut engine = if needs.all_pairs {
        Some(PairwiseEngine::new(
            symbols.clone(),
            config.grid.slots(),
            config.lags.all_pairs_response()?,
            config.lags.averaged()?,
            policy,
        )?)
    } else {
        None
    };
    let mut sign_rows = Vec::new();
    let n_days = source.dates().len();
    let batch = rayon::current_num_threads().max(1);
    for start in (0..n_days).step_by(batch) {
        let end = (start + batch).min(n_days);
        let days: Vec<SourceDay> = (start..end)
            .into_par_iter()
            .map(|d| source.day(d).map(|sd| project(sd, &idx)))
            .collect::<Result<_>>()?;
        if needs.signs {
            for d in &days {
                for (k, c) in d.counts.iter().enumerate() {
                    if let Some(c) = c {
                        sign_rows.push(SignRow::new(&symbols[k], d.market.date, c));
                    }
                }
            }
        }
        if !pairs.is_empty() {
            let parts: Vec<Vec<Option<(LagSums, LagSums)>>> = days
                .par_iter()
                .map(|d| pairs.iter().map(|p| pair_day(&d.market, p.i, p.j, &pair_lags, policy)).collect())
                .collect();
            for day_parts in parts {
                for (p, part) in pairs.iter_mut().zip(day_parts) {
                    if let Some((r, c)) = part {
                        p.absorb(&r, &c);
                    }
                }
            }
        }
        if let Some(e) = engine.as_mut() {
            let markets: Vec<MarketDay> = days.into_iter().map(|d| d.market).collect();
            e.absorb_days(&markets)?;
        }
    }
    Ok(PassOutput {
        universe: universe.clone(),
        sign_rows,
        pairs,
        stats: engine.map(PairwiseEngine::finish),
    })
}

/// Restricts `grid` to `lags`, which must all be on it.
pub fn restrict_lags(grid: &CurveGrid, lags: &[u32]) -> Result<CurveGrid> {
    let mut out = CurveGrid::new(grid.kind, grid.symbols.clone(), lags.to_vec())?;
    let n = grid.n_stocks();
    for (k_out, &lag) in lags.iter().enumerate() {
        let k = grid.lag_index(lag)?;
        for i in 0..n {
            for j in 0..n {
                out.set_point(i, j, k_out, grid.value(i, j, k), grid.count(i, j, k));
            }
        }
    }
    Ok(out)
}

/// Ranked passive or active responses, normalized per lag by the largest
/// absolute value across stocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub mode: String,
    pub lags: Vec<u32>,
    pub primary: u32,
    pub entries: Vec<crate::response::RankEntry>,
}

pub fn rank_stocks(response: &CurveGrid, active: bool, lags: &[u32], primary: u32, top: usize) -> Result<Ranking> {
    let primary_k = lags
        .iter()
        .position(|&l| l == primary)
        .ok_or_else(|| Error::InvalidLags(format!("rank lags do not contain the primary lag {primary}")))?;
    let grid = restrict_lags(response, lags)?;
    let pool = grid.symbols.clone();
    let curves = pool
        .iter()
        .map(|s| {
            let c = if active {
                active_response(&grid, s, &pool, "market")?
            } else {
                passive_response(&grid, s, &pool, "market")?
            };
            Ok((s.clone(), c.values))
        })
        .collect::<Result<Vec<_>>>()?;
    let normalizers: Vec<Option<f64>> = (0..lags.len())
        .map(|k| {
            curves
                .iter()
                .filter_map(|(_, v)| v[k])
                .map(f64::abs)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        })
        .collect();
    let entries: Vec<(String, Vec<Option<f64>>)> =
        curves.into_iter().map(|(s, v)| (s, normalize_per_lag(&v, &normalizers))).collect();
    Ok(Ranking {
        mode: if active { "active" } else { "passive" }.to_string(),
        lags: lags.to_vec(),
        primary,
        entries: rank_by_response(&entries, primary_k, top),
    })
}

impl Ranking {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["rank".to_string(), "symbol".to_string()];
        header.extend(self.lags.iter().map(|l| format!("tau_{l}")));
        wtr.write_record(&header)?;
        for (r, e) in self.entries.iter().enumerate() {
            let mut row = vec![(r + 1).to_string(), e.symbol.clone()];
            row.extend(e.values.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<ranking writer>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub curve: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<FitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Power-law fits of the pair correlators and, with all-pairs statistics,
/// of the market, passive and active averaged correlators.
pub fn fit_correlators(config: &RunConfig, pass: &PassOutput) -> Result<Vec<FitEntry>> {
    let mut curves: Vec<(String, LagCurve)> = pass
        .pairs
        .iter()
        .map(|p| (format!("correlator:{}:{}", p.stock_i, p.stock_j), p.correlator()))
        .collect();
    if let Some(stats) = &pass.stats {
        let grid = stats.correlator();
        if grid.n_stocks() >= 2 {
            curves.push(("market_correlator".into(), market_average_response(&grid)?));
            let pool = grid.symbols.clone();
            for s in &pool {
                curves.push((format!("passive_correlator:{s}"), passive_correlator(&grid, s, &pool, "market")?));
                curves.push((format!("active_correlator:{s}"), active_correlator(&grid, s, &pool, "market")?));
            }
        }
    }
    Ok(curves
        .par_iter()
        .map(|(name, c)| match fit_power_law(c, &config.fit) {
            Ok(r) => FitEntry {
                curve: name.clone(),
                result: Some(r),
                error: None,
            },
            Err(e) => FitEntry {
                curve: name.clone(),
                result: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

fn write_fits_csv<W: Write>(fits: &[FitEntry], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["curve", "theta", "tau0", "gamma", "chi2", "M", "memory_class", "identifiable", "at_bound", "error"])?;
    for f in fits {
        let mut row = vec![f.curve.clone()];
        match &f.result {
            Some(r) => row.extend([
                r.theta.to_string(),
                r.tau0.to_string(),
                r.gamma.to_string(),
                r.chi2.to_string(),
                r.n_points.to_string(),
                format!("{:?}", r.memory_class).to_lowercase(),
                r.identifiable.to_string(),
                r.at_bound.to_string(),
                String::new(),
            ]),
            None => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(f.error.clone().unwrap_or_default());
            }
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<fit writer>", e))?;
    Ok(())
}

/// Collects written files relative to the output directory.
struct Outputs<'a> {
    root: &'a Path,
    written: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn write(&mut self, rel: impl AsRef<Path>, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.written.push(rel.to_path_buf());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> Result<()> {
        self.write(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n").map_err(|e| Error::io("<json writer>", e))
        })
    }
}

fn stats_of(pass: &PassOutput) -> Result<&PairwiseStats> {
    pass.stats
        .as_ref()
        .ok_or_else(|| Error::Config("all-pairs statistics were not collected".into()))
}

fn write_stage(stage: Stage, config: &RunConfig, pass: &PassOutput, out: &mut Outputs) -> Result<()> {
    match stage {
        Stage::Signs => out.write("signs/summary.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            for r in &pass.sign_rows {
                wtr.serialize(r)?;
            }
            wtr.flush().map_err(|e| Error::io("signs/summary.csv", e))
        }),
        Stage::Respond => {
            for p in &pass.pairs {
                out.write(Path::new("respond").join(p.file_name()), |w| p.response().write_csv(w))?;
            }
            Ok(())
        }
        Stage::Correlate => {
            for p in &pass.pairs {
                out.write(Path::new("correlate").join(p.file_name()), |w| p.correlator().write_csv(w))?;
            }
            Ok(())
        }
        Stage::Noise => {
            for p in &pass.pairs {
                let curve = p.noise()?;
                out.write(Path::new("noise").join(p.file_name()), |w| curve.write_csv(w))?;
            }
            Ok(())
        }
        Stage::Matrix => {
            let response = stats_of(pass)?.response();
            let sectors = pass.universe.sectors();
            for &tau in &config.lags.matrix {
                let m = ResponseMatrix::from_grid(&response, tau, &sectors)?;
                let dir = Path::new("matrix");
                out.write(dir.join(format!("tau_{tau}.csv")), |w| m.write_csv(w))?;
                out.write(dir.join(format!("tau_{tau}.raw.csv")), |w| m.write_raw_csv(w))?;
                out.json(dir.join(format!("tau_{tau}.json")), &m.sidecar())?;
                let h = emit_heatmap_data(&m)?;
                out.write(dir.join(format!("tau_{tau}.heatmap.txt")), |w| h.write(w))?;
            }
            Ok(())
        }
        Stage::Average => {
            let stats = stats_of(pass)?;
            let averaged = config.lags.averaged()?;
            let response = market_average_response(&restrict_lags(&stats.response(), &averaged)?)?;
            let correlator = market_average_response(&stats.correlator())?;
            out.write("average/market_response.csv", |w| response.write_csv(w))?;
            out.write("average/market_correlator.csv", |w| correlator.write_csv(w))
        }
        Stage::Rank => {
            let response = stats_of(pass)?.response();
            for active in [false, true] {
                let r = rank_stocks(&response, active, &config.lags.rank, config.lags.rank_primary, config.rank_top)?;
                out.write(format!("rank/{}.csv", r.mode), |w| r.write_csv(w))?;
            }
            Ok(())
        }
        Stage::Fit => {
            let fits = fit_correlators(config, pass)?;
            out.json("fit/fits.json", &fits)?;
            out.write("fit/fits.csv", |w| write_fits_csv(&fits, w))
        }
    }
}

/// Opens the configured market.
pub fn open_source(config: &RunConfig, universe: &Universe) -> Result<Box<dyn MarketSource>> {
    match (&config.data, &config.synth) {
        (Some(d), _) => Ok(Box::new(FileSource::load(d, &universe.symbols(), &config.grid, config.carry)?)),
        (None, Some(s)) => Ok(Box::new(SynthSource::new(SynthMarket::new(s.clone())?))),
        (None, None) => Err(Error::Config("config needs a [data] or a [synth] section".into())),
    }
}

/// Runs the configured stages and writes their outputs plus `manifest.json`.
///
/// Work runs on a pool of `config.jobs` threads; outputs do not depend on
/// the pool size. A failing stage is recorded in the manifest, the other
/// stages still run, and the first failure is returned after the manifest
/// is written.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_on_current_pool(config))
}

fn run_on_current_pool(config: &RunConfig) -> Result<Manifest> {
    let universe = config.universe()?;
    let source = open_source(config, &universe)?;
    let root = config.out_dir.as_path();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let mut stages: Vec<Stage> = config.stages.clone();
    stages.sort();
    stages.dedup();
    let needs = PassNeeds::for_stages(&stages, universe.len());
    let mut out = Outputs {
        root,
        written: Vec::new(),
    };
    let mut records = Vec::new();
    let mut first_error = None;
    match collect(config, &universe, source.as_ref(), needs) {
        Ok(pass) => {
            for &stage in &stages {
                let before = out.written.len();
                let result = write_stage(stage, config, &pass, &mut out);
                let outputs = out.written[before..].iter().map(|p| slash_path(p)).collect();
                records.push(match result {
                    Ok(()) => StageRecord {
                        stage,
                        status: StageStatus::Completed,
                        error: None,
                        outputs,
                    },
                    Err(e) => {
                        let rec = StageRecord {
                            stage,
                            status: StageStatus::Failed,
                            error: Some(e.to_string()),
                            outputs,
                        };
                        first_error.get_or_insert(e);
                        rec
                    }
                });
            }
        }
        Err(e) => {
            for &stage in &stages {
                records.push(StageRecord {
                    stage,
                    status: StageStatus::Skipped,
                    error: Some(e.to_string()),
                    outputs: Vec::new(),
                });
            }
            first_error = Some(e);
        }
    }

    let mut canonical = config.clone();
    canonical.out_dir = PathBuf::new();
    canonical.jobs = 1;
    let manifest = Manifest {
        tool: "xresp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.result_hash()?,
        config: canonical,
        inputs: hash_inputs(&source.inputs())?,
        outputs: hash_outputs(root, &out.written)?,
        stages: records,
    };
    let path = root.join("manifest.json");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}
