//! Synthetic markets with known ground truth.
//!
//! Every random draw comes from a ChaCha8 stream keyed by the spec seed and
//! selected by `(purpose, stock, day)`, so any stock-day can be regenerated
//! alone and the output never depends on scheduling.

mod emit;
mod impact;
mod latent;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::{MarketDay, StockDay};
use crate::returns::MidpointSeries;
use crate::signing::SignSeries;

pub use emit::{ground_truth, stock_tick_day, write_market_files, GroundTruth, REFERENCE_PRICE_CENTS};
pub use impact::{add_impact, integrate_log_price, Kernel};
pub use latent::{threshold, threshold_sign, CalibrationTable, CorrelatorTarget, LatentSampler};

/// Seed-derived random streams.
#[derive(Debug, Clone, Copy)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub const SIGNS: u64 = 1;
    pub const PRICES: u64 = 2;
    pub const LATENT: u64 = 3;
    pub const CALIBRATION: u64 = 4;

    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    /// Independent generator for one `(purpose, stock, day)` cell.
    pub fn rng(&self, purpose: u64, stock: usize, day: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((purpose << 48) | ((stock as u64 & 0xFF_FFFF) << 24) | (day as u64 & 0xFF_FFFF));
        rng
    }
}

/// How per-second trade signs are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignModel {
    /// Independent signs: nonzero with probability `p_trade`, then `+1` with probability `p_buy`.
    Iid { p_trade: f64, p_buy: f64 },
    /// Thresholded shared latent factor; every ordered pair targets the same correlator.
    LatentFactor {
        p_trade: f64,
        #[serde(flatten)]
        target: CorrelatorTarget,
    },
}

/// One driver moving the prices of other stocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactLink {
    pub driver: usize,
    /// Driven stocks; empty means every stock except the driver.
    #[serde(default)]
    pub driven: Vec<usize>,
    pub amplitude: f64,
    pub kernel: Kernel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImpactModel {
    #[default]
    None,
    Transient { links: Vec<ImpactLink> },
}

fn default_slots() -> usize {
    crate::ingest::IntradayGrid::default().slots()
}

fn default_start_price() -> f64 {
    50.0
}

fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 1, 2).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    #[serde(default = "default_slots")]
    pub slots: usize,
    /// Stock symbols; defaults to `S000`, `S001`, ...
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbols: Vec<String>,
    pub sign_model: SignModel,
    #[serde(default)]
    pub impact_model: ImpactModel,
    /// Per-second standard deviation of idiosyncratic log-returns.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_start_price")]
    pub start_price: f64,
    #[serde(default = "default_start_date")]
    pub start_date: NaiveDate,
}

impl SynthSpec {
    /// A zero-intelligence market with unit trade probability and 1e-4 volatility.
    pub fn null(seed: u64, n_stocks: usize, n_days: usize, slots: usize) -> Self {
        SynthSpec {
            seed,
            n_stocks,
            n_days,
            slots,
            symbols: Vec::new(),
            sign_model: SignModel::Iid { p_trade: 1.0, p_buy: 0.5 },
            impact_model: ImpactModel::None,
            noise_sigma: 1e-4,
            start_price: default_start_price(),
            start_date: default_start_date(),
        }
    }

    pub fn symbols(&self) -> Vec<String> {
        if self.symbols.is_empty() {
            (0..self.n_stocks).map(|k| format!("S{k:03}")).collect()
        } else {
            self.symbols.clone()
        }
    }

    /// Consecutive weekdays starting at `start_date` (moved forward off a weekend).
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(self.n_days);
        let mut d = self.start_date;
        while out.len() < self.n_days {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                out.push(d);
            }
            d = d + Days::new(1);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stocks == 0 || self.slots < 2 {
            return Err(Error::Synth("need at least one stock and two slots".into()));
        }
        if !self.symbols.is_empty() && self.symbols.len() != self.n_stocks {
            return Err(Error::Synth(format!(
                "{} symbols for {} stocks",
                self.symbols.len(),
                self.n_stocks
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Synth(format!("invalid noise_sigma {}", self.noise_sigma)));
        }
        if !(self.start_price > 0.0 && self.start_price.is_finite()) {
            return Err(Error::Synth(format!("invalid start_price {}", self.start_price)));
        }
        match &self.sign_model {
            SignModel::Iid { p_trade, p_buy } => {
                for (name, v) in [("p_trade", *p_trade), ("p_buy", *p_buy)] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidProbability { name, value: v });
                    }
                }
            }
            SignModel::LatentFactor { p_trade, .. } => {
                threshold(*p_trade)?;
            }
        }
        if let ImpactModel::Transient { links } = &self.impact_model {
            for l in links {
                if l.driver >= self.n_stocks || l.driven.iter().any(|&k| k >= self.n_stocks) {
                    return Err(Error::Synth(format!("impact link refers to a stock beyond {}", self.n_stocks)));
                }
                if !l.amplitude.is_finite() {
                    return Err(Error::NonFiniteKernel);
                }
            }
        }
        Ok(())
    }
}

/// One stock's generated day: signs and midpoints on the session grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthStockDay {
    pub signs: Vec<i8>,
    pub log_midpoints: Vec<f64>,
}

impl SynthStockDay {
    pub fn midpoints(&self) -> Vec<f64> {
        self.log_midpoints.iter().map(|v| v.exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDay {
    pub index: usize,
    pub date: NaiveDate,
    pub stocks: Vec<SynthStockDay>,
}

impl SynthDay {
    pub fn to_market_day(&self) -> MarketDay {
        MarketDay {
            date: self.date,
            stocks: self
                .stocks
                .iter()
                .map(|s| {
                    Some(StockDay {
                        signs: s.signs.clone(),
                        log_mid: crate::returns::LogMidpoints {
                            first_defined: Some(0),
                            values: s.log_midpoints.clone(),
                        },
                    })
                })
                .collect(),
        }
    }
}

struct PreparedLink {
    driver: usize,
    driven: Vec<usize>,
    amplitude: f64,
    kernel: Vec<f64>,
}

/// A validated spec with its precomputed samplers; days are generated on demand.
pub struct SynthMarket {
    spec: SynthSpec,
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    latent: Option<LatentSampler>,
    links: Vec<PreparedLink>,
}

impl SynthMarket {
    pub fn new(spec: SynthSpec) -> Result<Self> {
        Self::with_table(spec, CalibrationTable::builtin())
    }

    pub fn with_table(spec: SynthSpec, table: &CalibrationTable) -> Result<Self> {
        spec.validate()?;
        let latent = match &spec.sign_model {
            SignModel::LatentFactor { p_trade, target } => Some(LatentSampler::new(target, *p_trade, spec.slots, table)?),
            SignModel::Iid { .. } => None,
        };
        let links = match &spec.impact_model {
            ImpactModel::None => Vec::new(),
            ImpactModel::Transient { links } => links
                .iter()
                .map(|l| {
                    let driven = if l.driven.is_empty() {
                        (0..spec.n_stocks).filter(|&k| k != l.driver).collect()
                    } else {
                        l.driven.clone()
                    };
                    Ok(PreparedLink {
                        driver: l.driver,
                        driven,
                        amplitude: l.amplitude,
                        kernel: l.kernel.values(spec.slots)?,
                    })
                })
                .collect::<Result<_>>()?,
        };
        Ok(SynthMarket {
            symbols: spec.symbols(),
            dates: spec.dates(),
            spec,
            latent,
            links,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn latent(&self) -> Option<&LatentSampler> {
        self.latent.as_ref()
    }

    fn day_signs(&self, day: usize) -> Vec<Vec<i8>> {
        let streams = Streams::new(self.spec.seed);
        let n = self.spec.slots;
        match (&self.spec.sign_model, &self.latent) {
            (SignModel::LatentFactor { .. }, Some(sampler)) => {
                let factor = sampler.sample_factor(&mut streams.rng(Streams::LATENT, 0, day));
                (0..self.spec.n_stocks)
                    .map(|k| sampler.signs(&factor, &mut streams.rng(Streams::SIGNS, k, day)))
                    .collect()
            }
            (SignModel::Iid { p_trade, p_buy }, _) => (0..self.spec.n_stocks)
                .map(|k| {
                    let mut rng = streams.rng(Streams::SIGNS, k, day);
                    (0..n)
                        .map(|_| {
                            let u: f64 = rng.random();
                            if u >= *p_trade {
                                0
                            } else if u < p_trade * p_buy {
                                1
                            } else {
                                -1
                            }
                        })
                        .collect()
                })
                .collect(),
            _ => unreachable!("latent sampler is built with the latent sign model"),
        }
    }

    /// Generates day `day` (0-based) of every stock.
    pub fn day(&self, day: usize) -> SynthDay {
        let streams = Streams::new(self.spec.seed);
        let n = self.spec.slots;
        let signs = self.day_signs(day);
        let stocks = signs
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let mut inc = vec![0.0; n];
                if self.spec.noise_sigma > 0.0 {
                    let mut rng = streams.rng(Streams::PRICES, k, day);
                    for v in inc.iter_mut().skip(1) {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = self.spec.noise_sigma * z;
                    }
                }
                for link in self.links.iter().filter(|l| l.driven.contains(&k)) {
                    add_impact(&mut inc, &signs[link.driver], &link.kernel, link.amplitude);
                }
                integrate_log_price(self.spec.start_price, &inc)
            })
            .collect::<Vec<_>>();
        SynthDay {
            index: day,
            date: self.dates[day],
            stocks: signs
                .into_iter()
                .zip(stocks)
                .map(|(signs, log_midpoints)| SynthStockDay { signs, log_midpoints })
                .collect(),
        }
    }

    pub fn days(&self) -> impl Iterator<Item = SynthDay> + '_ {
        (0..self.spec.n_days).map(|d| self.day(d))
    }
}

/// Per-stock sign and midpoint series of a zero-intelligence market.
pub fn gen_null_market(spec: &SynthSpec) -> Result<Vec<Vec<(SignSeries, MidpointSeries)>>> {
    if !matches!(spec.sign_model, SignModel::Iid { .. }) {
        return Err(Error::Synth("the null market needs the iid sign model".into()));
    }
    let market = SynthMarket::new(SynthSpec {
        impact_model: ImpactModel::None,
        ..spec.clone()
    })?;
    let days: Vec<SynthDay> = market.days().collect();
    Ok((0..spec.n_stocks)
        .map(|k| {
            let symbol = &market.symbols()[k];
            days.iter()
                .map(|d| {
                    let s = &d.stocks[k];
                    (
                        SignSeries { symbol: symbol.clone(), date: d.date, values: s.signs.clone() },
                        MidpointSeries::from_values(symbol.clone(), d.date, s.midpoints()),
                    )
                })
                .collect()
        })
        .collect())
}

/// Per-stock, per-day signs of a latent-factor market.
pub fn gen_correlated_signs(spec: &SynthSpec) -> Result<Vec<Vec<SignSeries>>> {
    if !matches!(spec.sign_model, SignModel::LatentFactor { .. }) {
        return Err(Error::Synth("correlated signs need the latent_factor sign model".into()));
    }
    let market = SynthMarket::new(spec.clone())?;
    let mut out: Vec<Vec<SignSeries>> = vec![Vec::with_capacity(spec.n_days); spec.n_stocks];
    for day in market.days() {
        for (k, s) in day.stocks.into_iter().enumerate() {
            out[k].push(SignSeries { symbol: market.symbols()[k].clone(), date: day.date, values: s.signs });
        }
    }
    Ok(out)
}

/// Midpoints of a stock driven by `driver_signs` through `kernel`, plus
/// Gaussian noise drawn from `seed`.
pub fn gen_impact_prices(
    symbol: &str,
    date: NaiveDate,
    driver_signs: &[i8],
    kernel: &Kernel,
    amplitude: f64,
    noise_sigma: f64,
    start_price: f64,
    seed: u64,
) -> Result<MidpointSeries> {
    let n = driver_signs.len();
    let k = kernel.values(n)?;
    if !amplitude.is_finite() {
        return Err(Error::NonFiniteKernel);
    }
    let mut inc = vec![0.0; n];
    if noise_sigma > 0.0 {
        let mut rng = Streams::new(seed).rng(Streams::PRICES, 0, 0);
        for v in inc.iter_mut().skip(1) {
            let z: f64 = rng.sample(StandardNormal);
            *v = noise_sigma * z;
        }
    }
    add_impact(&mut inc, driver_signs, &k, amplitude);
    let mids = integrate_log_price(start_price, &inc).into_iter().map(f64::exp).collect();
    Ok(MidpointSeries::from_values(symbol, date, mids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_market_examples() {
        let mut spec = SynthSpec::null(11, 1, 1, 1_000_000);
        let m = SynthMarket::new(spec.clone()).unwrap();
        let day = m.day(0);
        let mean = day.stocks[0].signs.iter().map(|&s| s as f64).sum::<f64>() / 1e6;
        assert!(mean.abs() < 3.0 / 1e3);
        assert_eq!(day, m.day(0));

        spec.slots = 100;
        spec.sign_model = SignModel::Iid { p_trade: 0.0, p_buy: 0.5 };
        let m = SynthMarket::new(spec.clone()).unwrap();
        assert!(m.day(0).stocks[0].signs.iter().all(|&s| s == 0));

        spec.sign_model = SignModel::Iid { p_trade: 1.2, p_buy: 0.5 };
        assert!(matches!(SynthMarket::new(spec), Err(Error::InvalidProbability { .. })));
    }

    #[test]
    fn streams_are_independent_of_generation_order() {
        let spec = SynthSpec::null(5, 3, 4, 200);
        let m = SynthMarket::new(spec).unwrap();
        let forward: Vec<SynthDay> = m.days().collect();
        assert_eq!(m.day(2), forward[2]);
        assert_ne!(forward[0].stocks[0].signs, forward[0].stocks[1].signs);
    }

    #[test]
    fn weekday_calendar() {
        let spec = SynthSpec::null(1, 1, 4, 10);
        let d = spec.dates();
        assert_eq!(d[0], NaiveDate::from_ymd_opt(2008, 1, 2).unwrap());
        assert_eq!(d[3], NaiveDate::from_ymd_opt(2008, 1, 7).unwrap());
    }

    #[test]
    fn delta_impact_hand_example() {
        let m = gen_impact_prices("I", NaiveDate::MIN, &[0, 1, 0, 0, 0], &Kernel::Delta { lag: 1 }, 0.002, 0.0, 40.0, 0)
            .unwrap();
        let r = crate::returns::log_return(&m, 1, 1).unwrap();
        assert!((r - 0.002).abs() < 1e-15);
        assert!(crate::returns::log_return(&m, 0, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn identical_latent_stream_gives_identical_signs() {
        let spec = SynthSpec {
            sign_model: SignModel::LatentFactor {
                p_trade: 0.5,
                target: CorrelatorTarget { theta: 1.0, tau0: 2.0, gamma: 1.0 },
            },
            ..SynthSpec::null(3, 2, 1, 500)
        };
        let signs = gen_correlated_signs(&spec).unwrap();
        assert_eq!(signs[0][0].values, signs[1][0].values);
    }

    #[test]
    fn unachievable_target_reports_bound() {
        let spec = SynthSpec {
            sign_model: SignModel::LatentFactor {
                p_trade: 0.5,
                target: CorrelatorTarget { theta: 1.18, tau0: 0.03, gamma: 1.06 },
            },
            ..SynthSpec::null(3, 2, 1, 500)
        };
        match SynthMarket::new(spec) {
            Err(Error::Unachievable { achievable, .. }) => assert_eq!(achievable, 1.0),
            other => panic!("expected an unachievable target, got {:?}", other.err()),
        }
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = SynthSpec {
            impact_model: ImpactModel::Transient {
                links: vec![ImpactLink {
                    driver: 0,
                    driven: vec![1],
                    amplitude: 1e-4,
                    kernel: Kernel::RiseDecay { rise: 3.0, decay: 30.0, reversal: 0.8 },
                }],
            },
            sign_model: SignModel::LatentFactor {
                p_trade: 0.4,
                target: CorrelatorTarget { theta: 0.45, tau0: 0.07, gamma: 1.0 },
            },
            ..SynthSpec::null(9, 2, 3, 100)
        };
        let text = toml::to_string(&spec).unwrap();
        let back: SynthSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
