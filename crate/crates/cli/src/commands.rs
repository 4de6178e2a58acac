use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use xresp_core::fitting::fit_power_law;
use xresp_core::ingest::{parse_tick_file, ParsedFile, SchemaDescriptor, TickKind};
use xresp_core::pipeline::{
    collect, open_source, rank_stocks, restrict_lags, run_pipeline, Manifest, PassNeeds, PassOutput, RunConfig,
    Stage, StageStatus,
};
use xresp_core::response::{
    active_correlator, active_response, market_average_response, passive_correlator, passive_response, CurveGrid,
    CurveKind, LagCurve,
};
use xresp_core::returns::build_midpoints;
use xresp_core::signing::sign_day;
use xresp_core::synth::{write_market_files, CalibrationTable, SynthMarket, SynthSpec};
use xresp_core::{Error, Result};

use crate::args::*;

/// File settings with command-line overrides applied.
pub fn settings(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        c.out_dir = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        c.jobs = jobs;
    }
    if let (Some(seed), Some(spec)) = (cli.seed, c.synth.as_mut()) {
        spec.seed = seed;
    }
    if c.jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    Ok(c)
}

/// Prints one line to stdout; a closed pipe is not an error.
fn say(line: impl std::fmt::Display) {
    let _ = writeln!(io::stdout().lock(), "{line}");
}

/// Writes to `<out>/<rel>` when `--out` was given, otherwise to stdout.
fn emit(out: Option<&Path>, rel: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            say(path.display());
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json_body<T: Serialize>(value: &T) -> impl FnOnce(&mut dyn Write) -> Result<()> + '_ {
    move |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w).map_err(|e| Error::io("<json writer>", e))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let config = settings(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Ingest(a) => ingest(&config, a, out),
        Command::Synth(a) => synth(config, a, cli.seed),
        Command::Calibrate(a) => calibrate(a, cli.seed, out),
        Command::Signs(a) => signs(&config, a),
        Command::Midpoints(a) => midpoints(&config, a),
        Command::Respond(a) => pair_curve(config, a, Stage::Respond, out),
        Command::Correlate(a) => pair_curve(config, a, Stage::Correlate, out),
        Command::Noise(a) => pair_curve(config, a, Stage::Noise, out),
        Command::Matrix(a) => matrix(config, a),
        Command::Average(a) => average(config, a, out),
        Command::Rank(a) => rank(config, a, out),
        Command::Fit(a) => fit(&config, a, out),
        Command::Run(a) => run(config, a),
    }
}

fn tick_file(config: &RunConfig, explicit: &Option<PathBuf>, kind: TickKind, symbol: &str) -> Result<PathBuf> {
    let path = match (explicit, &config.data) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => match kind {
            TickKind::Trades => d.trades_dir.join(format!("{symbol}.csv")),
            TickKind::Quotes => d.quotes_dir.join(format!("{symbol}.csv")),
        },
        (None, None) => {
            let flag = match kind {
                TickKind::Trades => "--trades",
                TickKind::Quotes => "--quotes",
            };
            return Err(Error::Config(format!("give {flag} or a config with a [data] section")));
        }
    };
    if !path.is_file() {
        return Err(Error::MissingInput(path));
    }
    Ok(path)
}

fn parse(config: &RunConfig, path: &Path, kind: TickKind, symbol: &str) -> Result<ParsedFile> {
    let schema = match (&config.data, kind) {
        (Some(d), TickKind::Trades) => d.trades_schema.clone(),
        (Some(d), TickKind::Quotes) => d.quotes_schema.clone(),
        (None, k) => SchemaDescriptor::default_for(k),
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tick_file(BufReader::new(f), &schema, kind, symbol)
}

#[derive(Serialize)]
struct FileReport {
    path: String,
    rows: usize,
    days: usize,
    events: usize,
    rejected: xresp_core::ingest::RejectCounts,
}

#[derive(Serialize)]
struct IngestReport {
    symbol: String,
    trades: Option<FileReport>,
    quotes: Option<FileReport>,
}

fn ingest(config: &RunConfig, a: &TickFiles, out: Option<&Path>) -> Result<()> {
    let mut report = IngestReport {
        symbol: a.symbol.clone(),
        trades: None,
        quotes: None,
    };
    for kind in [TickKind::Trades, TickKind::Quotes] {
        let explicit = match kind {
            TickKind::Trades => &a.trades,
            TickKind::Quotes => &a.quotes,
        };
        if explicit.is_none() && config.data.is_none() {
            continue;
        }
        let path = tick_file(config, explicit, kind, &a.symbol)?;
        let parsed = parse(config, &path, kind, &a.symbol)?;
        let events = parsed.days.iter().map(|d| d.trades.len() + d.quotes.len()).sum();
        let r = FileReport {
            path: path.display().to_string(),
            rows: parsed.rows,
            days: parsed.days.len(),
            events,
            rejected: parsed.rejected,
        };
        match kind {
            TickKind::Trades => report.trades = Some(r),
            TickKind::Quotes => report.quotes = Some(r),
        }
    }
    if report.trades.is_none() && report.quotes.is_none() {
        return Err(Error::Config("give --trades and/or --quotes".into()));
    }
    emit(out, &format!("ingest/{}.json", a.symbol), json_body(&report))
}

fn synth(mut config: RunConfig, a: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut spec = config
        .synth
        .take()
        .unwrap_or_else(|| SynthSpec::null(seed.unwrap_or(0), 2, 10, config.grid.slots()));
    if let Some(n) = a.stocks {
        if spec.symbols.len() != n {
            spec.symbols.clear();
        }
        spec.n_stocks = n;
    }
    if let Some(d) = a.days {
        spec.n_days = d;
    }
    let market = SynthMarket::new(spec)?;
    let paths = write_market_files(&market, &config.out_dir, &config.grid)?;
    for p in paths {
        say(p.display());
    }
    Ok(())
}

fn calibrate(a: &CalibrateArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let table = CalibrationTable::measure(&a.p_trade, a.rho_points, a.samples, seed.unwrap_or(2008))?;
    emit(out, "calibration.json", json_body(&table))
}

fn signs(config: &RunConfig, a: &TickFiles) -> Result<()> {
    let path = tick_file(config, &a.trades, TickKind::Trades, &a.symbol)?;
    let parsed = parse(config, &path, TickKind::Trades, &a.symbol)?;
    let dir = config.out_dir.join("signs").join(&a.symbol);
    for day in &parsed.days {
        let (series, undefined) = sign_day(&a.symbol, day.date, &day.trades, &config.grid, config.carry);
        let csv_path = dir.join(format!("{}.csv", day.date));
        let mut w = create(&csv_path)?;
        writeln!(w, "second,epsilon").map_err(|e| Error::io(&csv_path, e))?;
        for (slot, s) in series.nonzero() {
            writeln!(w, "{},{}", config.grid.second_of_slot(slot), s).map_err(|e| Error::io(&csv_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(format!("{}.json", day.date));
        let mut w = create(&json_path)?;
        json_body(&series.counts(undefined))(&mut w)?;
        w.flush().map_err(|e| Error::io(&json_path, e))?;
        say(csv_path.display());
    }
    Ok(())
}

fn midpoints(config: &RunConfig, a: &TickFiles) -> Result<()> {
    let path = tick_file(config, &a.quotes, TickKind::Quotes, &a.symbol)?;
    let parsed = parse(config, &path, TickKind::Quotes, &a.symbol)?;
    let dir = config.out_dir.join("midpoints").join(&a.symbol);
    for day in &parsed.days {
        let m = build_midpoints(&a.symbol, day.date, &day.quotes, &config.grid);
        let p = dir.join(format!("{}.csv", day.date));
        let mut w = create(&p)?;
        writeln!(w, "second,midpoint").map_err(|e| Error::io(&p, e))?;
        for slot in 0..m.len() {
            if let Some(v) = m.get(slot) {
                writeln!(w, "{},{}", config.grid.second_of_slot(slot), v).map_err(|e| Error::io(&p, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        say(p.display());
    }
    Ok(())
}

fn pass(config: &RunConfig, needs: PassNeeds) -> Result<PassOutput> {
    config.validate()?;
    let universe = config.universe()?;
    let source = open_source(config, &universe)?;
    collect(config, &universe, source.as_ref(), needs)
}

fn pair_curve(mut config: RunConfig, a: &PairArg, stage: Stage, out: Option<&Path>) -> Result<()> {
    let [i, j] = <[String; 2]>::try_from(a.pair.clone())
        .map_err(|_| Error::Config(format!("--pair needs two symbols `I,J`, got {:?}", a.pair)))?;
    config.pairs = vec![[i.clone(), j.clone()]];
    let needs = PassNeeds {
        signs: false,
        pairs: true,
        all_pairs: false,
    };
    let pass = pass(&config, needs)?;
    let p = &pass.pairs[0];
    let curve = match stage {
        Stage::Respond => p.response(),
        Stage::Correlate => p.correlator(),
        _ => p.noise()?,
    };
    emit(out, &format!("{}/{i}_{j}.csv", stage.name()), |w| curve.write_csv(w))
}

fn print_outputs(m: &Manifest, root: &Path) {
    for s in &m.stages {
        for o in &s.outputs {
            say(root.join(o).display());
        }
    }
}

fn matrix(mut config: RunConfig, a: &MatrixArgs) -> Result<()> {
    if !a.tau.is_empty() {
        let mut taus = a.tau.clone();
        taus.sort_unstable();
        taus.dedup();
        config.lags.matrix = taus;
    }
    config.stages = vec![Stage::Matrix];
    let m = run_pipeline(&config)?;
    print_outputs(&m, &config.out_dir);
    Ok(())
}

fn all_pairs(config: &RunConfig) -> Result<PassOutput> {
    let needs = PassNeeds {
        signs: false,
        pairs: false,
        all_pairs: true,
    };
    pass(config, needs)
}

fn average(config: RunConfig, a: &AverageArgs, out: Option<&Path>) -> Result<()> {
    let pass = all_pairs(&config)?;
    let stats = pass.stats.as_ref().expect("all-pairs statistics requested");
    let averaged = config.lags.averaged()?;
    let grid = match a.of {
        Statistic::Response => restrict_lags(&stats.response(), &averaged)?,
        Statistic::Correlator => restrict_lags(&stats.correlator(), &averaged)?,
    };
    let (pool, tag) = match a.pool.strip_prefix("sector:") {
        Some(sector) => (pass.universe.sector_members(sector)?, a.pool.clone()),
        None if a.pool == "market" => (pass.universe.symbols(), "market".to_string()),
        None => return Err(Error::Config(format!("pool must be `market` or `sector:<name>`, got {:?}", a.pool))),
    };
    let stat = match a.of {
        Statistic::Response => "response",
        Statistic::Correlator => "correlator",
    };
    let curve: LagCurve = match a.mode {
        AverageMode::Market => {
            let sub = restrict_stocks(&grid, &pool)?;
            let mut c = market_average_response(&sub)?;
            c.stock_i.clone_from(&tag);
            c.stock_j.clone_from(&tag);
            c
        }
        mode => {
            let stock = a
                .stock
                .as_deref()
                .ok_or_else(|| Error::Config("--stock is required for passive and active averages".into()))?;
            match (mode, a.of) {
                (AverageMode::Passive, Statistic::Response) => passive_response(&grid, stock, &pool, &tag)?,
                (AverageMode::Active, Statistic::Response) => active_response(&grid, stock, &pool, &tag)?,
                (AverageMode::Passive, Statistic::Correlator) => passive_correlator(&grid, stock, &pool, &tag)?,
                _ => active_correlator(&grid, stock, &pool, &tag)?,
            }
        }
    };
    let mode = match a.mode {
        AverageMode::Passive => "passive",
        AverageMode::Active => "active",
        AverageMode::Market => "market",
    };
    let name = match &a.stock {
        Some(s) if a.mode != AverageMode::Market => format!("average/{mode}_{stat}_{s}.csv"),
        _ => format!("average/{mode}_{stat}.csv"),
    };
    emit(out, &name, |w| curve.write_csv(w))
}

/// The sub-grid of `symbols`, in their given order.
fn restrict_stocks(grid: &CurveGrid, symbols: &[String]) -> Result<CurveGrid> {
    let idx = symbols.iter().map(|s| grid.index_of(s)).collect::<Result<Vec<_>>>()?;
    let mut out = CurveGrid::new(grid.kind, symbols.to_vec(), grid.lags.clone())?;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            for k in 0..grid.lags.len() {
                out.set_point(a, b, k, grid.value(i, j, k), grid.count(i, j, k));
            }
        }
    }
    Ok(out)
}

fn rank(mut config: RunConfig, a: &RankArgs, out: Option<&Path>) -> Result<()> {
    if !a.lags.is_empty() {
        let mut lags = a.lags.clone();
        lags.sort_unstable();
        lags.dedup();
        config.lags.rank = lags;
    }
    let primary = a.primary.unwrap_or(if config.lags.rank.contains(&config.lags.rank_primary) {
        config.lags.rank_primary
    } else {
        *config.lags.rank.last().ok_or_else(|| Error::InvalidLags("no rank lags".into()))?
    });
    config.lags.rank_primary = primary;
    let k = a.k.unwrap_or(config.rank_top);
    let pass = all_pairs(&config)?;
    let response = pass.stats.as_ref().expect("all-pairs statistics requested").response();
    let r = rank_stocks(&response, a.mode == RankMode::Active, &config.lags.rank, primary, k)?;
    emit(out, &format!("rank/{}.csv", r.mode), |w| r.write_csv(w))
}

fn fit(config: &RunConfig, a: &FitArgs, out: Option<&Path>) -> Result<()> {
    if !a.curve.is_file() {
        return Err(Error::MissingInput(a.curve.clone()));
    }
    let f = File::open(&a.curve).map_err(|e| Error::io(&a.curve, e))?;
    let curve = LagCurve::read_csv(BufReader::new(f), CurveKind::SignCorrelator)?;
    let result = fit_power_law(&curve, &config.fit)?;
    emit(out, "fit/fit.json", json_body(&result))
}

fn parse_stage(name: &str) -> Result<Stage> {
    Stage::ALL
        .into_iter()
        .find(|s| s.name() == name.trim())
        .ok_or_else(|| Error::Config(format!("unknown stage {name:?}")))
}

fn run(mut config: RunConfig, a: &RunArgs) -> Result<()> {
    if !a.stages.is_empty() {
        config.stages = a.stages.iter().map(|s| parse_stage(s)).collect::<Result<_>>()?;
    }
    let result = run_pipeline(&config);
    let manifest_path = config.out_dir.join("manifest.json");
    if let Ok(m) = Manifest::read(&manifest_path) {
        for s in &m.stages {
            let status = match s.status {
                StageStatus::Completed => "completed",
                StageStatus::Failed => "failed",
                StageStatus::Skipped => "skipped",
            };
            eprintln!("{:<10} {status} ({} files)", s.stage.name(), s.outputs.len());
        }
        say(manifest_path.display());
    }
    result.map(|_| ())
}
