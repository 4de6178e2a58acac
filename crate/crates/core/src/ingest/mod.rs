//! Tick-file ingestion and the intraday one-second grid.
//!
//! Trades and quotes arrive as separate delimited files with one-second
//! timestamps. Parsing groups rows by calendar date into [`TickDay`]s,
//! drops rows that violate event invariants (counting them), and leaves
//! alignment to the session grid to [`clip_to_grid`].

mod parse;
mod schema;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use parse::{merge_days, parse_tick_file, write_tick_file, ParsedFile, RejectCounts};
pub use schema::{SchemaDescriptor, TickKind};

/// 9:40:00 local exchange time.
pub const DEFAULT_OPEN_SECOND: u32 = 9 * 3600 + 40 * 60;
/// 15:50:00 local exchange time.
pub const DEFAULT_CLOSE_SECOND: u32 = 15 * 3600 + 50 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeEvent {
    pub second_of_day: u32,
    /// 1-based position within the second, in file order.
    pub seq_in_second: u32,
    pub price: f64,
    pub volume: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteEvent {
    pub second_of_day: u32,
    pub seq_in_second: u32,
    pub bid: f64,
    pub ask: f64,
}

impl QuoteEvent {
    pub fn midpoint(&self) -> f64 {
        (self.bid + self.ask) / 2.0
    }
}

/// One stock's raw trades and quotes for one calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickDay {
    pub symbol: String,
    pub date: NaiveDate,
    pub trades: Vec<TradeEvent>,
    pub quotes: Vec<QuoteEvent>,
}

impl TickDay {
    pub fn new(symbol: impl Into<String>, date: NaiveDate) -> Self {
        TickDay {
            symbol: symbol.into(),
            date,
            trades: Vec::new(),
            quotes: Vec::new(),
        }
    }
}

/// Half-open session window `[open_second, close_second)` with one slot per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct IntradayGrid {
    open_second: u32,
    close_second: u32,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    open_second: u32,
    close_second: u32,
}

impl TryFrom<GridRepr> for IntradayGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        IntradayGrid::new(r.open_second, r.close_second)
    }
}

impl From<IntradayGrid> for GridRepr {
    fn from(g: IntradayGrid) -> Self {
        GridRepr {
            open_second: g.open_second,
            close_second: g.close_second,
        }
    }
}

impl Default for IntradayGrid {
    fn default() -> Self {
        IntradayGrid {
            open_second: DEFAULT_OPEN_SECOND,
            close_second: DEFAULT_CLOSE_SECOND,
        }
    }
}

impl IntradayGrid {
    pub fn new(open_second: u32, close_second: u32) -> Result<Self> {
        if close_second <= open_second {
            return Err(Error::InvalidGrid {
                open: open_second,
                close: close_second,
            });
        }
        Ok(IntradayGrid {
            open_second,
            close_second,
        })
    }

    /// A grid of `slots` seconds starting at the default open.
    pub fn with_slots(slots: usize) -> Result<Self> {
        let slots = u32::try_from(slots).map_err(|_| Error::InvalidGrid {
            open: DEFAULT_OPEN_SECOND,
            close: u32::MAX,
        })?;
        Self::new(DEFAULT_OPEN_SECOND, DEFAULT_OPEN_SECOND.saturating_add(slots))
    }

    pub fn open_second(&self) -> u32 {
        self.open_second
    }

    pub fn close_second(&self) -> u32 {
        self.close_second
    }

    pub fn slots(&self) -> usize {
        (self.close_second - self.open_second) as usize
    }

    pub fn contains(&self, second_of_day: u32) -> bool {
        (self.open_second..self.close_second).contains(&second_of_day)
    }

    /// Slot index of a second of day, if it falls inside the session.
    pub fn slot(&self, second_of_day: u32) -> Option<usize> {
        self.contains(second_of_day)
            .then(|| (second_of_day - self.open_second) as usize)
    }

    pub fn second_of_slot(&self, slot: usize) -> u32 {
        self.open_second + slot as u32
    }
}

/// Keeps only events with `open <= second < close`.
pub fn clip_to_grid(day: &TickDay, grid: &IntradayGrid) -> TickDay {
    TickDay {
        symbol: day.symbol.clone(),
        date: day.date,
        trades: day
            .trades
            .iter()
            .filter(|t| grid.contains(t.second_of_day))
            .copied()
            .collect(),
        quotes: day
            .quotes
            .iter()
            .filter(|q| grid.contains(q.second_of_day))
            .copied()
            .collect(),
    }
}

/// Days with at least one trade.
pub fn trading_days<'a>(days: impl IntoIterator<Item = &'a TickDay>) -> BTreeSet<NaiveDate> {
    days.into_iter()
        .filter(|d| !d.trades.is_empty())
        .map(|d| d.date)
        .collect()
}

/// Trading days shared by a pair of stocks, labelled `1..=count` in date order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonDays {
    days: Vec<NaiveDate>,
}

impl CommonDays {
    /// Intersection without the emptiness check.
    pub fn intersect(a: &BTreeSet<NaiveDate>, b: &BTreeSet<NaiveDate>) -> Self {
        CommonDays {
            days: a.intersection(b).copied().collect(),
        }
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn count(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// `(label, date)` pairs with labels starting at 1.
    pub fn labelled(&self) -> impl Iterator<Item = (usize, NaiveDate)> + '_ {
        self.days.iter().enumerate().map(|(k, d)| (k + 1, *d))
    }
}

/// Sorted intersection of two trading-day sets; an empty intersection is an error.
pub fn common_days(
    days_i: &BTreeSet<NaiveDate>,
    days_j: &BTreeSet<NaiveDate>,
) -> Result<CommonDays> {
    let common = CommonDays::intersect(days_i, days_j);
    if common.is_empty() {
        return Err(Error::NoCommonDays(
            describe(days_i),
            describe(days_j),
        ));
    }
    Ok(common)
}

fn describe(days: &BTreeSet<NaiveDate>) -> String {
    match (days.first(), days.last()) {
        (Some(a), Some(b)) => format!("{} days [{a}..{b}]", days.len()),
        _ => "0 days".to_string(),
    }
}

pub(crate) fn format_hms(second_of_day: u32) -> String {
    format!(
        "{:02}:{:02}:{:02}",
        second_of_day / 3600,
        (second_of_day / 60) % 60,
        second_of_day % 60
    )
}
