use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::config::DataConfig;
use crate::error::{Error, Result};
use crate::ingest::{merge_days, parse_tick_file, trading_days, IntradayGrid, TickKind};
use crate::response::{MarketDay, StockDay};
use crate::returns::build_midpoints;
use crate::signing::{sign_day, CarryPolicy, SignCounts, SignSeries};
use crate::synth::SynthMarket;

/// One session of the whole universe, plus per-stock sign counts.
#[derive(Debug, Clone)]
pub struct SourceDay {
    pub market: MarketDay,
    /// `None` where the stock did not trade that day.
    pub counts: Vec<Option<SignCounts>>,
}

/// Session-by-session access to a market, in date order.
pub trait MarketSource: Sync {
    fn symbols(&self) -> &[String];
    fn dates(&self) -> &[NaiveDate];
    fn day(&self, index: usize) -> Result<SourceDay>;
    /// Files the run read, for the manifest.
    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }
}

fn counts_of(values: &[i8], undefined_prefix: usize) -> SignCounts {
    SignSeries {
        symbol: String::new(),
        date: NaiveDate::MIN,
        values: values.to_vec(),
    }
    .counts(undefined_prefix)
}

/// Generates each day on demand.
pub struct SynthSource {
    market: SynthMarket,
}

impl SynthSource {
    pub fn new(market: SynthMarket) -> Self {
        SynthSource { market }
    }

    pub fn market(&self) -> &SynthMarket {
        &self.market
    }
}

impl MarketSource for SynthSource {
    fn symbols(&self) -> &[String] {
        self.market.symbols()
    }

    fn dates(&self) -> &[NaiveDate] {
        self.market.dates()
    }

    fn day(&self, index: usize) -> Result<SourceDay> {
        let day = self.market.day(index);
        let counts = day.stocks.iter().map(|s| Some(counts_of(&s.signs, 0))).collect();
        Ok(SourceDay {
            market: day.to_market_day(),
            counts,
        })
    }
}

/// Tick files read, signed and gridded up front.
///
/// Sessions are the union of every stock's trading days; a stock without
/// trades on a date is absent from that session.
pub struct FileSource {
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    /// `days[stock][date index]`.
    days: Vec<Vec<Option<(StockDay, SignCounts)>>>,
    inputs: Vec<PathBuf>,
}

impl FileSource {
    /// Fails on the first missing file, in symbol order with trades before quotes.
    pub fn load(data: &DataConfig, symbols: &[String], grid: &IntradayGrid, carry: CarryPolicy) -> Result<Self> {
        let mut inputs = Vec::new();
        for sym in symbols {
            for dir in [&data.trades_dir, &data.quotes_dir] {
                let p = dir.join(format!("{sym}.csv"));
                if !p.is_file() {
                    return Err(Error::MissingInput(p));
                }
                inputs.push(p);
            }
        }
        let per_stock: Vec<Vec<(NaiveDate, StockDay, SignCounts)>> = symbols
            .par_iter()
            .map(|sym| load_stock(data, sym, grid, carry))
            .collect::<Result<_>>()?;
        let dates: Vec<NaiveDate> = per_stock
            .iter()
            .flat_map(|days| days.iter().map(|(d, _, _)| *d))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let days = per_stock
            .into_iter()
            .map(|stock_days| {
                let mut row: Vec<Option<(StockDay, SignCounts)>> = vec![None; dates.len()];
                for (date, day, counts) in stock_days {
                    let k = dates.binary_search(&date).expect("date is in the union");
                    row[k] = Some((day, counts));
                }
                row
            })
            .collect();
        Ok(FileSource {
            symbols: symbols.to_vec(),
            dates,
            days,
            inputs,
        })
    }
}

fn read(path: &Path, data: &DataConfig, kind: TickKind, symbol: &str) -> Result<Vec<crate::ingest::TickDay>> {
    let schema = match kind {
        TickKind::Trades => &data.trades_schema,
        TickKind::Quotes => &data.quotes_schema,
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_tick_file(f, schema, kind, symbol)?.days)
}

fn load_stock(
    data: &DataConfig,
    symbol: &str,
    grid: &IntradayGrid,
    carry: CarryPolicy,
) -> Result<Vec<(NaiveDate, StockDay, SignCounts)>> {
    let trades = read(&data.trades_dir.join(format!("{symbol}.csv")), data, TickKind::Trades, symbol)?;
    let quotes = read(&data.quotes_dir.join(format!("{symbol}.csv")), data, TickKind::Quotes, symbol)?;
    let days = merge_days(trades, quotes);
    let traded = trading_days(&days);
    Ok(days
        .into_iter()
        .filter(|d| traded.contains(&d.date))
        .map(|d| {
            let (signs, undefined) = sign_day(symbol, d.date, &d.trades, grid, carry);
            let counts = signs.counts(undefined);
            let log_mid = build_midpoints(symbol, d.date, &d.quotes, grid).log_midpoints();
            (
                d.date,
                StockDay {
                    signs: signs.values,
                    log_mid,
                },
                counts,
            )
        })
        .collect())
}

impl MarketSource for FileSource {
    fn symbols(&self) -> &[String] {
        &self.symbols
    }

    fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    fn day(&self, index: usize) -> Result<SourceDay> {
        let (stocks, counts) = self
            .days
            .iter()
            .map(|row| match &row[index] {
                Some((day, c)) => (Some(day.clone()), Some(*c)),
                None => (None, None),
            })
            .unzip();
        Ok(SourceDay {
            market: MarketDay {
                date: self.dates[index],
                stocks,
            },
            counts,
        })
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.inputs.clone()
    }
}
