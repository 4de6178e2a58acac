//! Writes synthetic markets as ordinary trades/quotes files.
//!
//! Each signed second carries one 100-share trade one cent above (buy) or
//! below (sell) the previous trade, so the tick rule recovers the generated
//! sign exactly. A reference trade one second before the open anchors the
//! first sign. Quotes straddle the midpoint by a fixed half-spread and are
//! printed whenever the midpoint changes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ImpactModel, SignModel, SynthMarket, SynthSpec, SynthStockDay};
use crate::error::{Error, Result};
use crate::ingest::{write_tick_file, IntradayGrid, QuoteEvent, SchemaDescriptor, TickDay, TickKind, TradeEvent};
use crate::response::averaged_lags;

pub const REFERENCE_PRICE_CENTS: i64 = 50_000;
const HALF_SPREAD: f64 = 0.005;
const VOLUME: u64 = 100;

/// Trades and quotes that reproduce `stock` when read back on `grid`.
pub fn stock_tick_day(symbol: &str, date: NaiveDate, stock: &SynthStockDay, grid: &IntradayGrid) -> TickDay {
    let mut day = TickDay::new(symbol, date);
    let mut cents = REFERENCE_PRICE_CENTS;
    if grid.open_second() > 0 {
        day.trades.push(TradeEvent {
            second_of_day: grid.open_second() - 1,
            seq_in_second: 1,
            price: cents as f64 / 100.0,
            volume: VOLUME,
        });
    }
    for (t, &s) in stock.signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        cents += s as i64;
        day.trades.push(TradeEvent {
            second_of_day: grid.second_of_slot(t),
            seq_in_second: 1,
            price: cents as f64 / 100.0,
            volume: VOLUME,
        });
    }
    let mut last = f64::NAN;
    for (t, m) in stock.midpoints().into_iter().enumerate() {
        if m != last {
            day.quotes.push(QuoteEvent {
                second_of_day: grid.second_of_slot(t),
                seq_in_second: 1,
                bid: m - HALF_SPREAD,
                ask: m + HALF_SPREAD,
            });
            last = m;
        }
    }
    day
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCurve {
    pub lags: Vec<u32>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthImpact {
    pub driver: String,
    pub driven: Vec<String>,
    pub amplitude: f64,
    /// `amplitude * sum_{u <= tau} K(u)`: the expected response.
    pub response: TruthCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub symbols: Vec<String>,
    pub dates: Vec<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_correlator: Option<TruthCurve>,
    pub impacts: Vec<TruthImpact>,
}

pub fn ground_truth(market: &SynthMarket) -> Result<GroundTruth> {
    let spec = market.spec();
    let lags = averaged_lags();
    let target_correlator = match &spec.sign_model {
        SignModel::LatentFactor { target, .. } => Some(TruthCurve {
            values: lags.iter().map(|&l| target.eval(l as f64)).collect::<Result<_>>()?,
            lags: lags.clone(),
        }),
        SignModel::Iid { .. } => None,
    };
    let symbols = market.symbols().to_vec();
    let impacts = match &spec.impact_model {
        ImpactModel::None => Vec::new(),
        ImpactModel::Transient { links } => links
            .iter()
            .map(|l| {
                let driven = if l.driven.is_empty() {
                    (0..spec.n_stocks).filter(|&k| k != l.driver).collect()
                } else {
                    l.driven.clone()
                };
                Ok(TruthImpact {
                    driver: symbols[l.driver].clone(),
                    driven: driven.iter().map(|&k| symbols[k].clone()).collect(),
                    amplitude: l.amplitude,
                    response: TruthCurve {
                        values: l.kernel.cumulative(&lags)?.into_iter().map(|g| l.amplitude * g).collect(),
                        lags: lags.clone(),
                    },
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(GroundTruth {
        spec: spec.clone(),
        dates: market.dates().to_vec(),
        symbols,
        target_correlator,
        impacts,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `trades/<SYM>.csv`, `quotes/<SYM>.csv` and `truth.json` under `dir`.
///
/// Returns the written paths in a fixed order.
pub fn write_market_files(market: &SynthMarket, dir: &Path, grid: &IntradayGrid) -> Result<Vec<PathBuf>> {
    if grid.slots() != market.spec().slots {
        return Err(Error::Config(format!(
            "grid has {} slots but the synthetic market has {}",
            grid.slots(),
            market.spec().slots
        )));
    }
    let mut paths = Vec::new();
    let mut writers = Vec::new();
    for kind in [TickKind::Trades, TickKind::Quotes] {
        let sub = dir.join(match kind {
            TickKind::Trades => "trades",
            TickKind::Quotes => "quotes",
        });
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for sym in market.symbols() {
            let p = sub.join(format!("{sym}.csv"));
            writers.push((kind, create(&p)?));
            paths.push(p);
        }
    }
    let headed = SchemaDescriptor::default_for(TickKind::Trades);
    let quote_schema = SchemaDescriptor::default_for(TickKind::Quotes);
    for day in market.days() {
        let n = market.symbols().len();
        for (k, stock) in day.stocks.iter().enumerate() {
            let tick = stock_tick_day(&market.symbols()[k], day.date, stock, grid);
            for (slot, schema) in [(k, &headed), (n + k, &quote_schema)] {
                let (kind, w) = &mut writers[slot];
                let mut schema = schema.clone();
                schema.has_header = day.index == 0;
                write_tick_file(std::slice::from_ref(&tick), &schema, *kind, &mut *w)?;
            }
        }
    }
    for (p, (_, mut w)) in paths.iter().zip(writers) {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let truth_path = dir.join("truth.json");
    let mut w = create(&truth_path)?;
    serde_json::to_writer_pretty(&mut w, &ground_truth(market)?)?;
    w.write_all(b"\n").map_err(|e| Error::io(&truth_path, e))?;
    w.flush().map_err(|e| Error::io(&truth_path, e))?;
    paths.push(truth_path);
    Ok(paths)
}
