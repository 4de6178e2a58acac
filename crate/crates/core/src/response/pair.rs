//! Single-pair estimators: response, sign correlator and response noise.

use super::{check_increasing, check_positive, AveragingPolicy, CurveFlag, CurveKind, LagCurve, LagSums};
use crate::error::{Error, Result};
use crate::returns::LogMidpoints;

/// One common day of a pair for the response `R_ij`: prices of `i`, signs of `j`.
#[derive(Debug, Clone, Copy)]
pub struct ResponseDay<'a> {
    /// Running label of the day among the pair's common days, starting at 1.
    pub label: usize,
    pub log_mid_i: &'a LogMidpoints,
    pub signs_j: &'a [i8],
}

/// One common day of a pair for the correlator `Theta_ij`.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatorDay<'a> {
    pub label: usize,
    pub signs_i: &'a [i8],
    pub signs_j: &'a [i8],
}

fn nonzero(signs: &[i8]) -> Vec<(usize, f64)> {
    signs
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != 0)
        .map(|(t, &s)| (t, s as f64))
        .collect()
}

/// Adds one day's `sum_t r_i(t, tau) eps_j(t)` to `out` for every lag.
///
/// Terms are accumulated in increasing `t`. Only `t` with both endpoints of
/// the return inside the day are sampled.
pub fn response_day_sums(
    log_mid_i: &LogMidpoints,
    signs_j: &[i8],
    policy: AveragingPolicy,
    out: &mut LagSums,
) {
    let Some(first) = log_mid_i.first_defined else {
        return;
    };
    let n = log_mid_i.len().min(signs_j.len());
    let nz = nonzero(&signs_j[..n]);
    let lm = &log_mid_i.values;
    for (k, &tau) in out.lags.iter().enumerate() {
        let tau = tau as usize;
        if tau >= n || first >= n - tau {
            continue;
        }
        let hi = n - tau;
        let a = nz.partition_point(|&(t, _)| t < first);
        let b = nz.partition_point(|&(t, _)| t < hi);
        let (mut sum, mut sq) = (0.0, 0.0);
        for &(t, s) in &nz[a..b] {
            let p = s * (lm[t + tau] - lm[t]);
            sum += p;
            sq += p * p;
        }
        out.sums[k] += sum;
        out.sq_sums[k] += sq;
        out.counts[k] += match policy {
            AveragingPolicy::NonzeroSigns => (b - a) as u64,
            AveragingPolicy::AllSeconds => (hi - first) as u64,
        };
    }
}

/// Adds one day's `sum_t eps_i(t + tau) eps_j(t)` to `out` for every lag.
pub fn correlator_day_sums(
    signs_i: &[i8],
    signs_j: &[i8],
    policy: AveragingPolicy,
    out: &mut LagSums,
) {
    let n = signs_i.len().min(signs_j.len());
    let nz = nonzero(&signs_j[..n]);
    for (k, &tau) in out.lags.iter().enumerate() {
        let tau = tau as usize;
        if tau >= n {
            continue;
        }
        let hi = n - tau;
        let b = nz.partition_point(|&(t, _)| t < hi);
        let mut sum = 0i64;
        let mut hits = 0i64;
        for &(t, s) in &nz[..b] {
            let p = s as i64 * signs_i[t + tau] as i64;
            sum += p;
            hits += p.abs();
        }
        out.sums[k] += sum as f64;
        out.sq_sums[k] += hits as f64;
        out.counts[k] += match policy {
            AveragingPolicy::NonzeroSigns => b as u64,
            AveragingPolicy::AllSeconds => hi as u64,
        };
    }
}

/// Pooled sums of the response over all given days, reduced in day order.
pub fn cross_response_sums(
    days: &[ResponseDay<'_>],
    lags: &[u32],
    policy: AveragingPolicy,
) -> Result<LagSums> {
    check_positive(lags)?;
    let mut total = LagSums::zeros(lags);
    for day in days {
        let mut part = LagSums::zeros(lags);
        response_day_sums(day.log_mid_i, day.signs_j, policy, &mut part);
        total.merge(&part);
    }
    Ok(total)
}

/// Response `R_ij(tau) = <r_i(t, tau) eps_j(t)>_t` over the pair's common days.
///
/// `i == j` gives the self-response. With no days the curve is flagged and
/// every value is missing.
pub fn cross_response(
    stock_i: &str,
    stock_j: &str,
    days: &[ResponseDay<'_>],
    lags: &[u32],
    policy: AveragingPolicy,
) -> Result<LagCurve> {
    let mut curve = cross_response_sums(days, lags, policy)?.into_curve(CurveKind::Response, stock_i, stock_j);
    if days.is_empty() {
        curve.flag = Some(CurveFlag::NoCommonDays);
    }
    Ok(curve)
}

pub fn sign_correlator_sums(
    days: &[CorrelatorDay<'_>],
    lags: &[u32],
    policy: AveragingPolicy,
) -> Result<LagSums> {
    check_increasing(lags)?;
    let mut total = LagSums::zeros(lags);
    for day in days {
        let mut part = LagSums::zeros(lags);
        correlator_day_sums(day.signs_i, day.signs_j, policy, &mut part);
        total.merge(&part);
    }
    Ok(total)
}

/// Sign correlator `Theta_ij(tau) = <eps_i(t + tau) eps_j(t)>_t`.
///
/// Lag 0 is allowed here and gives the equal-time correlation.
pub fn sign_correlator(
    stock_i: &str,
    stock_j: &str,
    days: &[CorrelatorDay<'_>],
    lags: &[u32],
    policy: AveragingPolicy,
) -> Result<LagCurve> {
    let mut curve =
        sign_correlator_sums(days, lags, policy)?.into_curve(CurveKind::SignCorrelator, stock_i, stock_j);
    if days.is_empty() {
        curve.flag = Some(CurveFlag::NoCommonDays);
    }
    Ok(curve)
}

/// Response noise from the odd/even day split.
///
/// `nu(tau) = sqrt(((R1 - R)^2 + (R2 - R)^2) / 2) / |R|` where `R1`, `R2`
/// pool the odd- and even-labelled days and `R` pools both halves. Missing
/// where `R` is zero or any of the three is missing.
pub fn response_noise(
    stock_i: &str,
    stock_j: &str,
    days: &[ResponseDay<'_>],
    lags: &[u32],
    policy: AveragingPolicy,
) -> Result<LagCurve> {
    check_positive(lags)?;
    if days.len() < 2 {
        return Err(Error::TooFewDays(days.len()));
    }
    let mut odd = LagSums::zeros(lags);
    let mut even = LagSums::zeros(lags);
    for day in days {
        let mut part = LagSums::zeros(lags);
        response_day_sums(day.log_mid_i, day.signs_j, policy, &mut part);
        if day.label % 2 == 1 {
            odd.merge(&part);
        } else {
            even.merge(&part);
        }
    }
    noise_from_halves(stock_i, stock_j, &odd, &even)
}

/// Response noise from already pooled odd-day and even-day sums.
pub fn noise_from_halves(stock_i: &str, stock_j: &str, odd: &LagSums, even: &LagSums) -> Result<LagCurve> {
    if odd.lags != even.lags {
        return Err(Error::LagMismatch);
    }
    let lags = &odd.lags;
    let mut all = odd.clone();
    all.merge(even);

    let values = (0..lags.len())
        .map(|k| {
            let (r1, r2, r) = (odd.mean(k)?, even.mean(k)?, all.mean(k)?);
            if r == 0.0 {
                return None;
            }
            let dist = (0.5 * ((r1 - r).powi(2) + (r2 - r).powi(2))).sqrt();
            Some(dist / r.abs())
        })
        .collect();
    LagCurve::new(
        CurveKind::ResponseNoise,
        stock_i,
        stock_j,
        lags.to_vec(),
        values,
        all.counts,
    )
}
