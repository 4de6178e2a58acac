//! Latent-factor sign generation and its calibration table.
//!
//! Each stock's sign at second `t` thresholds `Y_k(t) = a X(t) + sqrt(1 - a^2) Z_k(t)`:
//! `+1` above `c`, `-1` below `-c`, else `0`, with `c` chosen so that a sign
//! is nonzero with probability `p_trade`. `X` is a shared stationary Gaussian
//! process and the `Z_k` are independent white noise. Thresholding bends
//! correlations, so the map from the latent correlation `rho` to the measured
//! sign correlation is tabulated once by simulation and inverted at run time.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::Streams;
use crate::error::{Error, Result};
use crate::fitting::power_law_eval;

/// Threshold `c` with `P(|Y| > c) = p_trade` for standard normal `Y`.
pub fn threshold(p_trade: f64) -> Result<f64> {
    if !(p_trade > 0.0 && p_trade <= 1.0) {
        return Err(Error::InvalidProbability { name: "p_trade", value: p_trade });
    }
    if p_trade == 1.0 {
        return Ok(0.0);
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - 0.5 * p_trade))
}

#[inline]
pub fn threshold_sign(y: f64, c: f64) -> i8 {
    if y > c {
        1
    } else if y < -c {
        -1
    } else {
        0
    }
}

/// Measured sign correlation as a function of latent correlation.
///
/// `theta[a][b]` is the sign correlator, averaged over seconds in which the
/// second stock trades, for latent correlation `rho[b]` and trade
/// probability `p_trade[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub convention: String,
    pub seed: u64,
    pub samples: usize,
    pub p_trade: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

static BUILTIN: OnceLock<CalibrationTable> = OnceLock::new();

impl CalibrationTable {
    /// The table committed with the crate.
    pub fn builtin() -> &'static CalibrationTable {
        BUILTIN.get_or_init(|| {
            serde_json::from_str(include_str!("../../data/calibration.json")).expect("bundled calibration table")
        })
    }

    /// Simulates `samples` latent pairs per grid point, reusing the same
    /// normal draws for every `(p, rho)` cell.
    pub fn measure(p_trade: &[f64], rho_points: usize, samples: usize, seed: u64) -> Result<Self> {
        if rho_points < 2 || samples == 0 {
            return Err(Error::Config("calibration needs at least 2 rho points and 1 sample".into()));
        }
        let thresholds = p_trade.iter().map(|&p| threshold(p)).collect::<Result<Vec<_>>>()?;
        let mut rng = Streams::new(seed).rng(Streams::CALIBRATION, 0, 0);
        let draws: Vec<(f64, f64)> = (0..samples)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let rho: Vec<f64> = (0..rho_points).map(|b| b as f64 / (rho_points - 1) as f64).collect();
        let columns: Vec<Vec<f64>> = rho
            .par_iter()
            .map(|&r| {
                let s = (1.0 - r * r).max(0.0).sqrt();
                thresholds
                    .iter()
                    .map(|&c| {
                        if r == 0.0 {
                            return 0.0;
                        }
                        let (mut sum, mut count) = (0i64, 0i64);
                        for &(x, z) in &draws {
                            let ej = threshold_sign(x, c);
                            if ej != 0 {
                                let y = if r == 1.0 { x } else { r * x + s * z };
                                sum += (ej * threshold_sign(y, c)) as i64;
                                count += 1;
                            }
                        }
                        if count == 0 {
                            0.0
                        } else {
                            sum as f64 / count as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let theta = (0..p_trade.len()).map(|a| columns.iter().map(|col| col[a]).collect()).collect();
        Ok(CalibrationTable {
            convention: "nonzero_signs".into(),
            seed,
            samples,
            p_trade: p_trade.to_vec(),
            rho,
            theta,
        })
    }

    fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
        let hi = grid.partition_point(|&g| g < x).clamp(1, grid.len() - 1);
        let lo = hi - 1;
        let w = if grid[hi] > grid[lo] { (x - grid[lo]) / (grid[hi] - grid[lo]) } else { 0.0 };
        (lo, w.clamp(0.0, 1.0))
    }

    fn check_p(&self, p: f64) -> Result<()> {
        let (lo, hi) = (self.p_trade[0], *self.p_trade.last().unwrap());
        if !(p >= lo - 1e-12 && p <= hi + 1e-12) {
            return Err(Error::InvalidProbability { name: "p_trade", value: p });
        }
        Ok(())
    }

    /// Sign correlation for latent correlation `rho` in `[-1, 1]`.
    pub fn theta_of(&self, p: f64, rho: f64) -> Result<f64> {
        self.check_p(p)?;
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("latent correlation {rho} outside [-1, 1]")));
        }
        let (pa, pw) = Self::bracket(&self.p_trade, p);
        let (rb, rw) = Self::bracket(&self.rho, rho.abs());
        let cell = |a: usize| self.theta[a][rb] * (1.0 - rw) + self.theta[a][rb + 1] * rw;
        let v = if pw == 0.0 { cell(pa) } else { cell(pa) * (1.0 - pw) + cell(pa + 1) * pw };
        Ok(v.copysign(rho))
    }

    /// Largest sign correlation the generator reaches at `p`.
    pub fn max_theta(&self, p: f64) -> Result<f64> {
        self.theta_of(p, 1.0)
    }

    /// Latent correlation that produces sign correlation `theta`.
    pub fn rho_of(&self, p: f64, theta: f64) -> Result<f64> {
        let max = self.max_theta(p)?;
        if !(theta.abs() <= max) {
            return Err(Error::Unachievable { requested: theta, achievable: max });
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.theta_of(p, mid)? < theta.abs() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).copysign(theta))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Target cross sign correlator `theta / (1 + (tau / tau0)^2)^(gamma / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTarget {
    pub theta: f64,
    pub tau0: f64,
    pub gamma: f64,
}

impl CorrelatorTarget {
    pub fn eval(&self, tau: f64) -> Result<f64> {
        power_law_eval(self.theta, self.tau0, self.gamma, tau)
    }
}

/// Precomputed circulant-embedding sampler for the shared latent process.
#[derive(Clone)]
pub struct LatentSampler {
    slots: usize,
    loading: f64,
    threshold: f64,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Most negative embedding eigenvalue before clipping, relative to the largest.
    pub clipped: f64,
}

impl std::fmt::Debug for LatentSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatentSampler")
            .field("slots", &self.slots)
            .field("loading", &self.loading)
            .field("threshold", &self.threshold)
            .field("clipped", &self.clipped)
            .finish()
    }
}

impl LatentSampler {
    pub fn new(target: &CorrelatorTarget, p_trade: f64, slots: usize, table: &CalibrationTable) -> Result<Self> {
        let threshold = threshold(p_trade)?;
        if target.theta < 0.0 {
            return Err(Error::Domain("target amplitude must be non-negative".into()));
        }
        let loading2 = table.rho_of(p_trade, target.theta)?;
        let m = (2 * slots.max(1)).next_power_of_two();
        let mut row = vec![Complex::new(0.0, 0.0); m];
        if loading2 > 0.0 {
            for tau in 0..=m / 2 {
                let rho = if tau == 0 {
                    1.0
                } else {
                    (table.rho_of(p_trade, target.eval(tau as f64)?)? / loading2).clamp(-1.0, 1.0)
                };
                row[tau] = Complex::new(rho, 0.0);
                if tau > 0 && tau < m - tau {
                    row[m - tau] = Complex::new(rho, 0.0);
                }
            }
        }
        let fft = FftPlannerScalar::new().plan_fft_forward(m);
        fft.process(&mut row);
        let largest = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let smallest = row.iter().map(|c| c.re).fold(0.0f64, f64::min);
        let clipped = if largest > 0.0 { smallest / largest } else { 0.0 };
        if clipped < -1e-6 {
            log::warn!("latent covariance embedding clipped negative eigenvalues (relative {clipped:.2e})");
        }
        let sqrt_eigen = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(LatentSampler {
            slots,
            loading: loading2.sqrt(),
            threshold,
            sqrt_eigen,
            fft,
            clipped,
        })
    }

    pub fn loading(&self) -> f64 {
        self.loading
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// One day of the shared process `X`, unit variance.
    pub fn sample_factor<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        if self.loading == 0.0 {
            return vec![0.0; self.slots];
        }
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eigen
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.slots);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Thresholded signs of one stock given the day's factor.
    pub fn signs<R: Rng>(&self, factor: &[f64], rng: &mut R) -> Vec<i8> {
        let a = self.loading;
        let s = (1.0 - a * a).max(0.0).sqrt();
        factor
            .iter()
            .map(|&x| {
                let z: f64 = if s > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                threshold_sign(a * x + s * z, self.threshold)
            })
            .collect()
    }
}
