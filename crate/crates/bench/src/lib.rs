//! Fixtures shared by the benchmarks.

use chrono::NaiveDate;
use xresp_core::ingest::TradeEvent;
use xresp_core::response::MarketDay;
use xresp_core::synth::{SignModel, SynthMarket, SynthSpec};

/// One session of a zero-intelligence market with `n_stocks` stocks.
pub fn market_day(n_stocks: usize, slots: usize) -> MarketDay {
    let spec = SynthSpec {
        sign_model: SignModel::Iid { p_trade: 0.3, p_buy: 0.5 },
        ..SynthSpec::null(1, n_stocks, 1, slots)
    };
    SynthMarket::new(spec).expect("valid spec").day(0).to_market_day()
}

/// `n` trades spread over a session with a deterministic zig-zag price path.
pub fn trades(n: usize, open_second: u32, slots: u32) -> Vec<TradeEvent> {
    let mut price = 50.0;
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    (0..n)
        .map(|k| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            price += match state % 3 {
                0 => 0.01,
                1 => -0.01,
                _ => 0.0,
            };
            TradeEvent {
                second_of_day: open_second + (k as u64 * slots as u64 / n as u64) as u32,
                seq_in_second: 1,
                price,
                volume: 100,
            }
        })
        .collect()
}

pub fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 1, 2).expect("valid date")
}
