//! Naive reference estimators and random tick data shared by the
//! integration tests. Everything here is written as plain loops over
//! (day, t, tau), without any of the library's sums or matrix products.

#![allow(dead_code)]

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xresp_core::response::{AveragingPolicy, MarketDay, StockDay};
use xresp_core::returns::MidpointSeries;

/// One stock on one day as raw arrays: signs and raw slot prices (NaN = no quote).
#[derive(Debug, Clone)]
pub struct RawDay {
    pub signs: Vec<i8>,
    pub prices: Vec<f64>,
}

/// `days[d][i]`: stock `i` on day `d`, `None` when it did not trade.
pub type RawMarket = Vec<Vec<Option<RawDay>>>;

pub fn date(d: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 1, 2).unwrap() + chrono::Days::new(d as u64)
}

/// Random signs and a random-walk price with a missing prefix and quote gaps.
pub fn raw_day(rng: &mut ChaCha8Rng, slots: usize) -> RawDay {
    let p_trade = rng.random_range(0.05..0.9);
    let signs = (0..slots)
        .map(|_| {
            if rng.random_bool(p_trade) {
                if rng.random_bool(0.5) { 1 } else { -1 }
            } else {
                0
            }
        })
        .collect();
    let prefix = rng.random_range(0..slots / 10 + 1);
    let mut price = rng.random_range(5.0..500.0);
    let prices = (0..slots)
        .map(|t| {
            price *= (rng.random_range(-1e-3..1e-3f64)).exp();
            if t < prefix || rng.random_bool(0.3) { f64::NAN } else { price }
        })
        .collect();
    RawDay { signs, prices }
}

pub fn raw_market(seed: u64, stocks: usize, days: usize, slots: usize, p_absent: f64) -> RawMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..days)
        .map(|_| {
            (0..stocks)
                .map(|_| (!rng.random_bool(p_absent)).then(|| raw_day(&mut rng, slots)))
                .collect()
        })
        .collect()
}

pub fn to_market_days(raw: &RawMarket) -> Vec<MarketDay> {
    raw.iter()
        .enumerate()
        .map(|(d, stocks)| MarketDay {
            date: date(d),
            stocks: stocks
                .iter()
                .map(|s| {
                    s.as_ref().map(|s| StockDay {
                        signs: s.signs.clone(),
                        log_mid: MidpointSeries::from_values("X", date(d), s.prices.clone()).log_midpoints(),
                    })
                })
                .collect(),
        })
        .collect()
}

/// Last finite positive price at or before each slot.
pub fn forward_fill(prices: &[f64]) -> Vec<Option<f64>> {
    (0..prices.len())
        .map(|t| (0..=t).rev().map(|s| prices[s]).find(|p| p.is_finite() && *p > 0.0))
        .collect()
}

/// A naive estimate: value, sample count and mean absolute term (the error scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Naive {
    pub value: Option<f64>,
    pub count: u64,
    pub scale: f64,
}

fn finish(sum: f64, abs: f64, terms: u64, count: u64) -> Naive {
    Naive {
        value: (count > 0).then(|| sum / count as f64),
        count,
        scale: if terms > 0 { abs / terms as f64 } else { 0.0 },
    }
}

/// `<log(m_i(t + tau) / m_i(t)) eps_j(t)>` over the given `(prices_i, signs_j)` days.
pub fn response(days: &[(&[f64], &[i8])], tau: usize, policy: AveragingPolicy) -> Naive {
    let (mut sum, mut abs, mut terms, mut count) = (0.0, 0.0, 0u64, 0u64);
    for (prices, signs) in days {
        let mid = forward_fill(prices);
        let n = mid.len().min(signs.len());
        for t in 0..n {
            if t + tau >= n {
                break;
            }
            let (Some(a), Some(b)) = (mid[t], mid[t + tau]) else { continue };
            if policy == AveragingPolicy::AllSeconds {
                count += 1;
            }
            if signs[t] != 0 {
                let term = (b / a).ln() * signs[t] as f64;
                sum += term;
                abs += term.abs();
                terms += 1;
                if policy == AveragingPolicy::NonzeroSigns {
                    count += 1;
                }
            }
        }
    }
    finish(sum, abs, terms, count)
}

/// `<eps_i(t + tau) eps_j(t)>` over the given `(signs_i, signs_j)` days.
pub fn correlator(days: &[(&[i8], &[i8])], tau: usize, policy: AveragingPolicy) -> Naive {
    let (mut sum, mut abs, mut terms, mut count) = (0.0, 0.0, 0u64, 0u64);
    for (si, sj) in days {
        let n = si.len().min(sj.len());
        for t in 0..n {
            if t + tau >= n {
                break;
            }
            match policy {
                AveragingPolicy::AllSeconds => count += 1,
                AveragingPolicy::NonzeroSigns => count += (sj[t] != 0) as u64,
            }
            let term = (si[t + tau] * sj[t]) as f64;
            sum += term;
            abs += term.abs();
            terms += (sj[t] != 0) as u64;
        }
    }
    finish(sum, abs, terms, count)
}

/// Odd/even noise from day-labelled pooled responses; `days` are in label order.
pub fn noise(days: &[(&[f64], &[i8])], tau: usize, policy: AveragingPolicy) -> Option<f64> {
    let odd: Vec<_> = days.iter().step_by(2).copied().collect();
    let even: Vec<_> = days.iter().skip(1).step_by(2).copied().collect();
    let r1 = response(&odd, tau, policy).value?;
    let r2 = response(&even, tau, policy).value?;
    let r = response(days, tau, policy).value?;
    if r == 0.0 {
        return None;
    }
    Some((((r1 - r).powi(2) + (r2 - r).powi(2)) / 2.0).sqrt() / r.abs())
}

/// Days on which both `i` and `j` traded, in date order.
pub fn common<'a>(raw: &'a RawMarket, i: usize, j: usize) -> Vec<(&'a RawDay, &'a RawDay)> {
    raw.iter()
        .filter_map(|d| Some((d[i].as_ref()?, d[j].as_ref()?)))
        .collect()
}

pub fn pair_response(raw: &RawMarket, i: usize, j: usize, tau: usize, policy: AveragingPolicy) -> Naive {
    let days: Vec<_> = common(raw, i, j).into_iter().map(|(a, b)| (&a.prices[..], &b.signs[..])).collect();
    response(&days, tau, policy)
}

pub fn pair_correlator(raw: &RawMarket, i: usize, j: usize, tau: usize, policy: AveragingPolicy) -> Naive {
    let days: Vec<_> = common(raw, i, j).into_iter().map(|(a, b)| (&a.signs[..], &b.signs[..])).collect();
    correlator(&days, tau, policy)
}

pub fn pair_noise(raw: &RawMarket, i: usize, j: usize, tau: usize, policy: AveragingPolicy) -> Option<f64> {
    let days: Vec<_> = common(raw, i, j).into_iter().map(|(a, b)| (&a.prices[..], &b.signs[..])).collect();
    if days.len() < 2 {
        return None;
    }
    noise(&days, tau, policy)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// `stat(i, j)` for every ordered pair, as a dense matrix.
pub fn pair_matrix(n: usize, stat: impl Fn(usize, usize) -> Option<f64>) -> Vec<Vec<Option<f64>>> {
    (0..n).map(|i| (0..n).map(|j| stat(i, j)).collect()).collect()
}

/// Mean over `j != i` of row `i`.
pub fn passive(m: &[Vec<Option<f64>>], i: usize) -> Option<f64> {
    mean((0..m.len()).filter(|&j| j != i).filter_map(|j| m[i][j]))
}

/// Mean over `i != j` of column `j`.
pub fn active(m: &[Vec<Option<f64>>], j: usize) -> Option<f64> {
    mean((0..m.len()).filter(|&i| i != j).filter_map(|i| m[i][j]))
}

pub fn market(m: &[Vec<Option<f64>>]) -> Option<f64> {
    mean((0..m.len()).filter_map(|i| passive(m, i)))
}

/// Relative agreement: `|a - b| <= tol * max(|b|, scale)`.
pub fn close(a: Option<f64>, b: Option<f64>, scale: f64, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol * b.abs().max(scale).max(f64::MIN_POSITIVE),
        _ => false,
    }
}

/// Tick rule written per trade: the sign of the latest price change at or
/// before it, or undefined when the price has not moved yet.
pub fn tick_signs(prices: &[f64]) -> Vec<Option<i8>> {
    (0..prices.len())
        .map(|k| {
            (1..=k).rev().find_map(|m| {
                let d = prices[m] - prices[m - 1];
                (d != 0.0).then(|| if d > 0.0 { 1 } else { -1 })
            })
        })
        .collect()
}

/// Per-second sign from `(second, price)` trades in file order.
pub fn second_signs(trades: &[(u32, f64)], open: u32, slots: usize) -> Vec<i8> {
    let prices: Vec<f64> = trades.iter().map(|t| t.1).collect();
    let per_trade = tick_signs(&prices);
    (0..slots)
        .map(|t| {
            let s: i32 = trades
                .iter()
                .zip(&per_trade)
                .filter(|((sec, _), _)| *sec == open + t as u32)
                .filter_map(|(_, s)| s.map(i32::from))
                .sum();
            s.signum() as i8
        })
        .collect()
}

/// Midpoint of the last in-session quote at or before each slot.
pub fn slot_midpoints(quotes: &[(u32, f64, f64)], open: u32, slots: usize) -> Vec<Option<f64>> {
    (0..slots)
        .map(|t| {
            quotes
                .iter()
                .filter(|(sec, _, _)| *sec >= open && *sec <= open + t as u32)
                .last()
                .map(|(_, b, a)| (b + a) / 2.0)
        })
        .collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Agreement of two noise values. Noise divides the spread of the half
/// means by `|R|`, so a relative error `tol` in the pooled sums grows by
/// `(1 + 1/nu) * scale / |R|`.
pub fn noise_close(got: Option<f64>, want: Option<f64>, pooled: Naive, tol: f64) -> bool {
    match (got, want, pooled.value) {
        (Some(g), Some(w), Some(r)) => {
            let gain = (1.0 + 1.0 / w) * pooled.scale.max(r.abs()) / r.abs();
            (g - w).abs() <= 4.0 * tol * gain * w
        }
        (g, w, _) => g.is_none() && w.is_none(),
    }
}
