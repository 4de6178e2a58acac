//! Impact kernels: how a driver's trade signs move another stock's log-midpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-second log-price increment kernel `K(u)`, `u >= 1`.
///
/// A sign at second `s` adds `amplitude * K(u)` to the log-midpoint increment
/// at `s + u`, so the expected response is `amplitude * sum_{u <= tau} K(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Kernel {
    /// `K(u) = exp(-u / rise) / rise - reversal * exp(-u / decay) / decay`.
    ///
    /// With `decay > rise` and `0 < reversal < 1` the cumulative response rises
    /// to a maximum and then relaxes to a lower permanent level.
    RiseDecay { rise: f64, decay: f64, reversal: f64 },
    /// All impact arrives `lag` seconds after the trade.
    Delta { lag: u32 },
    /// `values[u - 1] = K(u)`.
    Custom { values: Vec<f64> },
}

const TAIL: f64 = 1e-14;

impl Kernel {
    /// Kernel values `K(1..=len)`, truncated where the tail is negligible and
    /// never longer than `max_len`.
    pub fn values(&self, max_len: usize) -> Result<Vec<f64>> {
        let out = match self {
            Kernel::RiseDecay { rise, decay, reversal } => {
                if !(*rise > 0.0 && *decay > 0.0 && reversal.is_finite()) {
                    return Err(Error::NonFiniteKernel);
                }
                let slow = rise.max(*decay);
                let len = ((slow * -TAIL.ln()).ceil() as usize).clamp(1, max_len.max(1));
                (1..=len)
                    .map(|u| {
                        let u = u as f64;
                        (-u / rise).exp() / rise - reversal * (-u / decay).exp() / decay
                    })
                    .collect()
            }
            Kernel::Delta { lag } => {
                if *lag == 0 {
                    return Err(Error::Config("delta kernel lag must be at least 1".into()));
                }
                let mut v = vec![0.0; *lag as usize];
                v[*lag as usize - 1] = 1.0;
                v.truncate(max_len);
                v
            }
            Kernel::Custom { values } => values.iter().copied().take(max_len).collect(),
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel);
        }
        Ok(out)
    }

    /// Cumulative kernel `G(tau) = sum_{u=1}^{tau} K(u)` at each lag.
    pub fn cumulative(&self, lags: &[u32]) -> Result<Vec<f64>> {
        let max = lags.iter().copied().max().unwrap_or(0) as usize;
        let k = self.values(max)?;
        let mut prefix = vec![0.0; max + 1];
        for u in 1..=max {
            prefix[u] = prefix[u - 1] + k.get(u - 1).copied().unwrap_or(0.0);
        }
        Ok(lags.iter().map(|&l| prefix[l as usize]).collect())
    }

    /// Index into `lags` of the largest cumulative response.
    pub fn implied_argmax(&self, lags: &[u32]) -> Result<usize> {
        let g = self.cumulative(lags)?;
        Ok(g
            .iter()
            .enumerate()
            .fold(0, |best, (k, v)| if *v > g[best] { k } else { best }))
    }
}

/// Adds `amplitude * K(u) * sign(t - u)` to `increments[t]`.
pub fn add_impact(increments: &mut [f64], driver_signs: &[i8], kernel: &[f64], amplitude: f64) {
    let n = increments.len().min(driver_signs.len());
    for (s, &e) in driver_signs[..n].iter().enumerate() {
        if e == 0 {
            continue;
        }
        let w = amplitude * e as f64;
        for (u, k) in kernel.iter().enumerate() {
            let t = s + u + 1;
            if t >= n {
                break;
            }
            increments[t] += w * k;
        }
    }
}

/// Log-midpoint path from a starting price and per-second increments.
///
/// `increments[0]` is ignored; the path starts at `ln start_price`.
pub fn integrate_log_price(start_price: f64, increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len());
    let mut x = start_price.ln();
    for (t, inc) in increments.iter().enumerate() {
        if t > 0 {
            x += inc;
        }
        out.push(x);
    }
    out
}
