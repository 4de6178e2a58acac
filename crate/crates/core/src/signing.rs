//! Trade signs from consecutive price changes, aggregated per second.
//!
//! A trade above the previous trade price is buyer-initiated (+1), below it
//! seller-initiated (-1); an unchanged price repeats the previous sign. The
//! per-second sign is the sign of the sum of the trade signs in that second.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{IntradayGrid, TradeEvent};

/// What the first trades of a day inherit before any price change is seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarryPolicy {
    /// Leading trades stay unsigned until the first intraday price change.
    #[default]
    None,
    /// Leading trades take this sign (for example the previous session's last sign).
    Seed(i8),
}

/// Per-trade signs aligned with the day's trades; `None` marks an undefined sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradeSignSeries {
    pub signs: Vec<Option<i8>>,
    pub undefined_prefix: usize,
}

/// Per-second signs on the session grid, each in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSeries {
    pub symbol: String,
    pub date: NaiveDate,
    pub values: Vec<i8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCounts {
    pub buy_seconds: usize,
    pub sell_seconds: usize,
    pub zero_seconds: usize,
    pub undefined_prefix: usize,
}

impl SignSeries {
    pub fn counts(&self, undefined_prefix: usize) -> SignCounts {
        let mut c = SignCounts {
            undefined_prefix,
            ..Default::default()
        };
        for &v in &self.values {
            match v {
                1 => c.buy_seconds += 1,
                -1 => c.sell_seconds += 1,
                _ => c.zero_seconds += 1,
            }
        }
        c
    }

    /// `(slot, sign)` for every nonzero slot.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(t, &v)| (t, v))
    }
}

fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Signs every trade of one day by the tick rule, carrying the previous
/// sign through unchanged prices (also across second boundaries).
pub fn classify_trade_signs(trades: &[TradeEvent], carry: CarryPolicy) -> TradeSignSeries {
    let mut state: Option<i8> = match carry {
        CarryPolicy::None => None,
        CarryPolicy::Seed(s) => Some(s.signum()).filter(|&s| s != 0),
    };
    let mut prev_price: Option<f64> = None;
    let mut signs = Vec::with_capacity(trades.len());
    for t in trades {
        if let Some(p) = prev_price {
            let change = sgn(t.price - p);
            if change != 0 {
                state = Some(change);
            }
        }
        signs.push(state);
        prev_price = Some(t.price);
    }
    let undefined_prefix = signs.iter().take_while(|s| s.is_none()).count();
    TradeSignSeries {
        signs,
        undefined_prefix,
    }
}

/// Per-second sign: `sgn` of the summed defined trade signs in each grid second.
///
/// Seconds without trades, with only undefined signs, or with balanced
/// buys and sells get 0. Trades outside the grid are ignored.
pub fn aggregate_second_signs(
    trade_signs: &TradeSignSeries,
    trades: &[TradeEvent],
    grid: &IntradayGrid,
) -> Vec<i8> {
    debug_assert_eq!(trade_signs.signs.len(), trades.len());
    let mut sums = vec![0i32; grid.slots()];
    for (t, s) in trades.iter().zip(&trade_signs.signs) {
        if let (Some(slot), Some(s)) = (grid.slot(t.second_of_day), s) {
            sums[slot] += *s as i32;
        }
    }
    sums.into_iter().map(|s| s.signum() as i8).collect()
}

/// Tick-rule signs of one day's trades on `grid`, plus the undefined-prefix length.
pub fn sign_day(
    symbol: &str,
    date: NaiveDate,
    trades: &[TradeEvent],
    grid: &IntradayGrid,
    carry: CarryPolicy,
) -> (SignSeries, usize) {
    let per_trade = classify_trade_signs(trades, carry);
    let values = aggregate_second_signs(&per_trade, trades, grid);
    (
        SignSeries {
            symbol: symbol.to_string(),
            date,
            values,
        },
        per_trade.undefined_prefix,
    )
}
