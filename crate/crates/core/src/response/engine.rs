//! All-pairs estimator: every ordered pair of a universe in one pass per day.
//!
//! For a fixed lag the day's response sums of all pairs form one matrix
//! product, `S(tau) = A(tau) B` with `A[i][t] = r_i(t, tau)` and
//! `B[t][j] = eps_j(t)`. Sign correlators use the same layout with shifted
//! signs in `A`; those products are small integers and run in single
//! precision without rounding. Days are reduced strictly in date order,
//! so the output does not depend on the number of worker threads.

use chrono::NaiveDate;
use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use super::market::CurveGrid;
use super::{check_increasing, check_positive, AveragingPolicy, CurveKind};
use crate::error::{Error, Result};
use crate::returns::LogMidpoints;

/// One stock on one trading day, already on the session grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StockDay {
    pub signs: Vec<i8>,
    pub log_mid: LogMidpoints,
}

/// Every stock of the universe on one date; `None` where a stock did not trade.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub stocks: Vec<Option<StockDay>>,
}

#[derive(Debug, Clone)]
struct Accum {
    sums: Vec<f64>,
    sq_sums: Vec<f64>,
    counts: Vec<u64>,
}

impl Accum {
    fn zeros(len: usize, variance: bool) -> Self {
        Accum {
            sums: vec![0.0; len],
            sq_sums: if variance { vec![0.0; len] } else { Vec::new() },
            counts: vec![0; len],
        }
    }

    fn add_at(&mut self, at: usize, other: &Accum) {
        self.sums[at] += other.sums[at];
        if !self.sq_sums.is_empty() {
            self.sq_sums[at] += other.sq_sums[at];
        }
        self.counts[at] += other.counts[at];
    }
}

/// One day's contribution; arrays are indexed `(k * n + i) * n + j`.
struct DayPartial {
    present: Vec<bool>,
    response: Accum,
    correlator: Accum,
}

/// Streaming all-pairs response and correlator accumulator.
#[derive(Debug, Clone)]
pub struct PairwiseEngine {
    symbols: Vec<String>,
    slots: usize,
    response_lags: Vec<u32>,
    correlator_lags: Vec<u32>,
    policy: AveragingPolicy,
    variance: bool,
    odd: Accum,
    even: Accum,
    correlator: Accum,
    common_days: Vec<u32>,
    days_seen: usize,
}

impl PairwiseEngine {
    pub fn new(
        symbols: Vec<String>,
        slots: usize,
        response_lags: Vec<u32>,
        correlator_lags: Vec<u32>,
        policy: AveragingPolicy,
    ) -> Result<Self> {
        check_positive(&response_lags)?;
        check_increasing(&correlator_lags)?;
        let n = symbols.len();
        Ok(PairwiseEngine {
            slots,
            policy,
            variance: false,
            odd: Accum::zeros(n * n * response_lags.len(), false),
            even: Accum::zeros(n * n * response_lags.len(), false),
            correlator: Accum::zeros(n * n * correlator_lags.len(), false),
            common_days: vec![0; n * n],
            days_seen: 0,
            symbols,
            response_lags,
            correlator_lags,
        })
    }

    /// Also accumulate squared terms, enabling standard errors.
    pub fn with_variance(mut self) -> Self {
        let n = self.symbols.len();
        self.variance = true;
        self.odd = Accum::zeros(n * n * self.response_lags.len(), true);
        self.even = Accum::zeros(n * n * self.response_lags.len(), true);
        self.correlator = Accum::zeros(n * n * self.correlator_lags.len(), true);
        self
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn days_seen(&self) -> usize {
        self.days_seen
    }

    fn check_day(&self, day: &MarketDay) -> Result<()> {
        if day.stocks.len() != self.symbols.len() {
            return Err(Error::Config(format!(
                "market day {} has {} stocks, engine expects {}",
                day.date,
                day.stocks.len(),
                self.symbols.len()
            )));
        }
        for s in day.stocks.iter().flatten() {
            if s.signs.len() != self.slots || s.log_mid.len() != self.slots {
                return Err(Error::Config(format!("market day {} is not on a {}-slot grid", day.date, self.slots)));
            }
        }
        Ok(())
    }

    pub fn absorb_day(&mut self, day: &MarketDay) -> Result<()> {
        self.absorb_days(std::slice::from_ref(day))
    }

    /// Computes the days' contributions in parallel on the current rayon
    /// pool, then adds them in the given order.
    pub fn absorb_days(&mut self, days: &[MarketDay]) -> Result<()> {
        for d in days {
            self.check_day(d)?;
        }
        let partials: Vec<DayPartial> = days.par_iter().map(|d| self.day_partial(d)).collect();
        for p in &partials {
            self.absorb_partial(p);
        }
        Ok(())
    }

    fn absorb_partial(&mut self, p: &DayPartial) {
        let n = self.symbols.len();
        self.days_seen += 1;
        for i in 0..n {
            for j in 0..n {
                if !(p.present[i] && p.present[j]) {
                    continue;
                }
                let pair = i * n + j;
                self.common_days[pair] += 1;
                let half = if self.common_days[pair] % 2 == 1 { &mut self.odd } else { &mut self.even };
                for k in 0..self.response_lags.len() {
                    half.add_at(k * n * n + pair, &p.response);
                }
                for k in 0..self.correlator_lags.len() {
                    self.correlator.add_at(k * n * n + pair, &p.correlator);
                }
            }
        }
    }

    fn day_partial(&self, day: &MarketDay) -> DayPartial {
        let n = self.symbols.len();
        let slots = self.slots;
        let present: Vec<bool> = day.stocks.iter().map(Option::is_some).collect();

        let mut b = Array2::<f64>::zeros((slots, n));
        let mut bf = Array2::<f32>::zeros((slots, n));
        // prefix[j][t] = nonzero signs of j in slots [0, t)
        let mut prefix = vec![vec![0u32; slots + 1]; n];
        for (j, s) in day.stocks.iter().enumerate() {
            let Some(s) = s else { continue };
            for (t, &e) in s.signs.iter().enumerate() {
                b[[t, j]] = e as f64;
                bf[[t, j]] = e as f32;
                prefix[j][t + 1] = prefix[j][t] + (e != 0) as u32;
            }
        }
        let b_abs = self.variance.then(|| b.mapv(f64::abs));
        let bf_abs = self.variance.then(|| bf.mapv(f32::abs));

        let mut response = Accum::zeros(n * n * self.response_lags.len(), self.variance);
        let mut a = Array2::<f64>::zeros((n, slots));
        for (k, &tau) in self.response_lags.iter().enumerate() {
            let tau = tau as usize;
            if tau >= slots {
                continue;
            }
            let m = slots - tau;
            let mut av = a.slice_mut(s![.., ..m]);
            av.fill(0.0);
            let mut start = vec![m; n];
            for (i, s) in day.stocks.iter().enumerate() {
                let Some(first) = s.as_ref().and_then(|s| s.log_mid.first_defined) else { continue };
                if first >= m {
                    continue;
                }
                start[i] = first;
                let lm = &day.stocks[i].as_ref().unwrap().log_mid.values;
                let mut row = av.row_mut(i);
                for t in first..m {
                    row[t] = lm[t + tau] - lm[t];
                }
            }
            let av = a.slice(s![.., ..m]);
            let sums = av.dot(&b.slice(s![..m, ..]));
            let sq = b_abs.as_ref().map(|ba| av.mapv(|x| x * x).dot(&ba.slice(s![..m, ..])));
            let base = k * n * n;
            for i in 0..n {
                for j in 0..n {
                    if !(present[i] && present[j]) || start[i] >= m {
                        continue;
                    }
                    let at = base + i * n + j;
                    response.sums[at] = sums[[i, j]];
                    if let Some(sq) = &sq {
                        response.sq_sums[at] = sq[[i, j]];
                    }
                    response.counts[at] = match self.policy {
                        AveragingPolicy::NonzeroSigns => (prefix[j][m] - prefix[j][start[i]]) as u64,
                        AveragingPolicy::AllSeconds => (m - start[i]) as u64,
                    };
                }
            }
        }

        let mut correlator = Accum::zeros(n * n * self.correlator_lags.len(), self.variance);
        for (k, &tau) in self.correlator_lags.iter().enumerate() {
            let tau = tau as usize;
            if tau >= slots {
                continue;
            }
            let m = slots - tau;
            // Row i of the shifted sign matrix is eps_i(t + tau), t in [0, m).
            let shifted: ArrayView2<f32> = bf.slice(s![tau.., ..]);
            let shifted = shifted.t();
            let sums = shifted.dot(&bf.slice(s![..m, ..]));
            let hits = bf_abs.as_ref().map(|ba| ba.slice(s![tau.., ..]).t().dot(&ba.slice(s![..m, ..])));
            let base = k * n * n;
            for i in 0..n {
                for j in 0..n {
                    if !(present[i] && present[j]) {
                        continue;
                    }
                    let at = base + i * n + j;
                    correlator.sums[at] = sums[[i, j]] as f64;
                    if let Some(h) = &hits {
                        correlator.sq_sums[at] = h[[i, j]] as f64;
                    }
                    correlator.counts[at] = match self.policy {
                        AveragingPolicy::NonzeroSigns => prefix[j][m] as u64,
                        AveragingPolicy::AllSeconds => m as u64,
                    };
                }
            }
        }

        DayPartial {
            present,
            response,
            correlator,
        }
    }

    pub fn finish(self) -> PairwiseStats {
        let n = self.symbols.len();
        let mut total = self.odd.clone();
        for at in 0..total.sums.len() {
            total.add_at(at, &self.even);
        }
        PairwiseStats {
            n,
            symbols: self.symbols,
            response_lags: self.response_lags,
            correlator_lags: self.correlator_lags,
            response: total,
            odd: self.odd,
            even: self.even,
            correlator: self.correlator,
            common_days: self.common_days,
        }
    }
}

/// Reduced sums of every ordered pair.
#[derive(Debug, Clone)]
pub struct PairwiseStats {
    n: usize,
    pub symbols: Vec<String>,
    pub response_lags: Vec<u32>,
    pub correlator_lags: Vec<u32>,
    response: Accum,
    odd: Accum,
    even: Accum,
    correlator: Accum,
    common_days: Vec<u32>,
}

fn mean_of(acc: &Accum, at: usize) -> Option<f64> {
    (acc.counts[at] > 0).then(|| acc.sums[at] / acc.counts[at] as f64)
}

fn std_error_of(acc: &Accum, at: usize) -> Option<f64> {
    let c = acc.counts[at];
    if acc.sq_sums.is_empty() || c < 2 {
        return None;
    }
    let nf = c as f64;
    let mean = acc.sums[at] / nf;
    let var = ((acc.sq_sums[at] - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Some((var / nf).sqrt())
}

impl PairwiseStats {
    fn at(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n + i) * self.n + j
    }

    fn grid(&self, kind: CurveKind, lags: &[u32], value: impl Fn(usize) -> Option<f64>, acc: &Accum) -> CurveGrid {
        let mut g = CurveGrid::new(kind, self.symbols.clone(), lags.to_vec()).expect("validated lags");
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..lags.len() {
                    let at = self.at(k, i, j);
                    g.set_point(i, j, k, value(at), acc.counts[at]);
                }
            }
        }
        g
    }

    /// Number of trading days shared by `i` and `j`.
    pub fn common_days(&self, i: usize, j: usize) -> u32 {
        self.common_days[i * self.n + j]
    }

    pub fn response(&self) -> CurveGrid {
        self.grid(CurveKind::Response, &self.response_lags, |at| mean_of(&self.response, at), &self.response)
    }

    pub fn correlator(&self) -> CurveGrid {
        self.grid(
            CurveKind::SignCorrelator,
            &self.correlator_lags,
            |at| mean_of(&self.correlator, at),
            &self.correlator,
        )
    }

    /// Odd/even response noise of every pair; missing for pairs with fewer than two common days.
    pub fn response_noise(&self) -> CurveGrid {
        let value = |at: usize| {
            let pair = at % (self.n * self.n);
            if self.common_days[pair] < 2 {
                return None;
            }
            let (r1, r2, r) = (mean_of(&self.odd, at)?, mean_of(&self.even, at)?, mean_of(&self.response, at)?);
            if r == 0.0 {
                return None;
            }
            Some((0.5 * ((r1 - r).powi(2) + (r2 - r).powi(2))).sqrt() / r.abs())
        };
        self.grid(CurveKind::ResponseNoise, &self.response_lags, value, &self.response)
    }

    /// Standard error of `R_ij` at response-lag index `k`; needs [`PairwiseEngine::with_variance`].
    pub fn response_std_error(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        std_error_of(&self.response, self.at(k, i, j))
    }

    pub fn correlator_std_error(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        std_error_of(&self.correlator, self.at(k, i, j))
    }
}
