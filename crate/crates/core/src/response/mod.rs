//! Lag statistics: response functions, sign correlators, response noise,
//! the market response matrix and passive/active averages.
//!
//! Every estimator reduces per-day partial sums ([`LagSums`]) in day order,
//! so results do not depend on how the per-day work was scheduled.

mod engine;
mod market;
mod pair;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use engine::{MarketDay, PairwiseEngine, PairwiseStats, StockDay};
pub use market::{
    active_correlator, active_response, market_average_response, market_response_matrix,
    normalize_per_lag, passive_correlator, passive_response, rank_by_response, CurveGrid,
    RankEntry, ResponseMatrix,
};
pub use pair::{
    correlator_day_sums, cross_response, cross_response_sums, noise_from_halves, response_day_sums, response_noise,
    sign_correlator, sign_correlator_sums, CorrelatorDay, ResponseDay,
};

/// Which seconds enter the time average of a response or correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingPolicy {
    /// Only seconds in which the impacting stock traded (`eps_j(t) != 0`).
    #[default]
    NonzeroSigns,
    /// Every second of the session, zero signs included.
    AllSeconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Response,
    SignCorrelator,
    ResponseNoise,
    AveragedResponse,
    AveragedCorrelator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFlag {
    NoCommonDays,
}

/// A statistic as a function of time lag, with per-lag sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCurve {
    pub kind: CurveKind,
    pub stock_i: String,
    pub stock_j: String,
    pub lags: Vec<u32>,
    pub values: Vec<Option<f64>>,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<CurveFlag>,
}

impl LagCurve {
    pub fn new(
        kind: CurveKind,
        stock_i: impl Into<String>,
        stock_j: impl Into<String>,
        lags: Vec<u32>,
        values: Vec<Option<f64>>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        check_increasing(&lags)?;
        if values.len() != lags.len() || counts.len() != lags.len() {
            return Err(Error::InvalidLags(format!(
                "{} lags, {} values, {} counts",
                lags.len(),
                values.len(),
                counts.len()
            )));
        }
        Ok(LagCurve {
            kind,
            stock_i: stock_i.into(),
            stock_j: stock_j.into(),
            lags,
            values,
            counts,
            flag: None,
        })
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn value_at(&self, lag: u32) -> Option<f64> {
        let k = self.lags.binary_search(&lag).ok()?;
        self.values[k]
    }

    /// `(lag, value)` for every defined point.
    pub fn defined_points(&self) -> Vec<(f64, f64)> {
        self.lags
            .iter()
            .zip(&self.values)
            .filter_map(|(&l, v)| v.map(|v| (l as f64, v)))
            .collect()
    }

    /// CSV with header `tau,value,count`; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["tau", "value", "count"])?;
        for k in 0..self.lags.len() {
            let value = self.values[k].map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record([self.lags[k].to_string(), value, self.counts[k].to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<curve writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, kind: CurveKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let pos = |name: &str| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Header(format!("missing column {name:?}")))
        };
        let (pt, pv, pc) = (pos("tau")?, pos("value")?, pos("count").ok());
        let (mut lags, mut values, mut counts) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let bad = |what: &str| Error::Config(format!("bad {what} in curve row {rec:?}"));
            let tau: u32 = rec.get(pt).unwrap_or("").parse().map_err(|_| bad("tau"))?;
            let raw = rec.get(pv).unwrap_or("");
            let value = if raw.is_empty() {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| bad("value"))?)
            };
            let count = match pc.and_then(|p| rec.get(p)) {
                Some(c) if !c.is_empty() => c.parse().map_err(|_| bad("count"))?,
                _ => 0,
            };
            lags.push(tau);
            values.push(value);
            counts.push(count);
        }
        LagCurve::new(kind, "", "", lags, values, counts)
    }
}

pub(crate) fn check_increasing(lags: &[u32]) -> Result<()> {
    if lags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidLags("lags must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn check_positive(lags: &[u32]) -> Result<()> {
    check_increasing(lags)?;
    if lags.first() == Some(&0) {
        return Err(Error::InvalidLags("response lags must be at least 1 s".into()));
    }
    Ok(())
}

/// Lags of the market matrices: 1, 2, 60, 300, 1800 and 7200 s.
pub const MATRIX_LAGS: [u32; 6] = [1, 2, 60, 300, 1800, 7200];

/// Lags reported by the influence rankings.
pub const RANK_LAGS: [u32; 4] = [1, 2, 60, 300];

/// Every second from 1 to `max` inclusive.
pub fn dense_lags(max: u32) -> Vec<u32> {
    (1..=max).collect()
}

/// `points` integer lags spaced logarithmically from `min` to `max`.
///
/// Rounded geometric points that collide are pushed up by one second, so
/// the grid stays strictly increasing and still ends at `max`.
pub fn log_lags(points: usize, min: u32, max: u32) -> Result<Vec<u32>> {
    if points < 2 || min == 0 || max <= min || (max - min + 1) < points as u32 {
        return Err(Error::InvalidLags(format!(
            "cannot place {points} log-spaced lags in [{min}, {max}]"
        )));
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<u32> = Vec::with_capacity(points);
    for k in 0..points {
        let x = (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp().round() as u32;
        let floor = out.last().map_or(min, |p| p + 1);
        out.push(x.max(floor));
    }
    if out.last() != Some(&max) {
        return Err(Error::InvalidLags(format!(
            "cannot place {points} distinct log-spaced lags in [{min}, {max}]"
        )));
    }
    Ok(out)
}

/// The 34-point grid from 1 s to 10^4 s used for averaged statistics.
pub fn averaged_lags() -> Vec<u32> {
    log_lags(34, 1, 10_000).expect("static grid")
}

/// Running sums behind a lag statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSums {
    pub lags: Vec<u32>,
    pub sums: Vec<f64>,
    pub sq_sums: Vec<f64>,
    pub counts: Vec<u64>,
}

impl LagSums {
    pub fn zeros(lags: &[u32]) -> Self {
        LagSums {
            lags: lags.to_vec(),
            sums: vec![0.0; lags.len()],
            sq_sums: vec![0.0; lags.len()],
            counts: vec![0; lags.len()],
        }
    }

    pub fn merge(&mut self, other: &LagSums) {
        debug_assert_eq!(self.lags, other.lags);
        for k in 0..self.lags.len() {
            self.sums[k] += other.sums[k];
            self.sq_sums[k] += other.sq_sums[k];
            self.counts[k] += other.counts[k];
        }
    }

    pub fn mean(&self, k: usize) -> Option<f64> {
        (self.counts[k] > 0).then(|| self.sums[k] / self.counts[k] as f64)
    }

    /// Standard error of the mean at lag index `k`, from the sample variance.
    pub fn std_error(&self, k: usize) -> Option<f64> {
        let n = self.counts[k];
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mean = self.sums[k] / nf;
        let var = ((self.sq_sums[k] - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Some((var / nf).sqrt())
    }

    pub fn into_curve(self, kind: CurveKind, stock_i: &str, stock_j: &str) -> LagCurve {
        let values = (0..self.lags.len()).map(|k| self.mean(k)).collect();
        LagCurve {
            kind,
            stock_i: stock_i.to_string(),
            stock_j: stock_j.to_string(),
            lags: self.lags,
            values,
            counts: self.counts,
            flag: None,
        }
    }
}
