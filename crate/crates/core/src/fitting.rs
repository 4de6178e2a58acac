//! Power-law fits `Theta(tau) = theta / (1 + (tau / tau0)^2)^(gamma / 2)`.
//!
//! The amplitude enters linearly, so every `(tau0, gamma)` candidate of the
//! seed grid gets its least-squares `theta` in closed form. The best seeds
//! are then refined jointly by Levenberg-Marquardt inside the box bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::LagCurve;

pub const N_PARAMS: usize = 3;

/// `theta / (1 + (tau / tau0)^2)^(gamma / 2)`.
pub fn power_law_eval(theta: f64, tau0: f64, gamma: f64, tau: f64) -> Result<f64> {
    if !(tau0 > 0.0) {
        return Err(Error::Domain(format!("tau0 must be positive, got {tau0}")));
    }
    Ok(model(theta, tau0.ln(), gamma, tau))
}

#[inline]
fn model(theta: f64, ln_tau0: f64, gamma: f64, tau: f64) -> f64 {
    let w = tau * (-ln_tau0).exp();
    theta * (1.0 + w * w).powf(-0.5 * gamma)
}

/// `sum (f - y)^2 / (M - n_params)`.
pub fn normalized_chi2(model_values: &[f64], data_values: &[f64], n_params: usize) -> Result<f64> {
    let m = data_values.len();
    if model_values.len() != m {
        return Err(Error::Domain(format!(
            "{} model values for {m} data values",
            model_values.len()
        )));
    }
    if m <= n_params {
        return Err(Error::TooFewPoints { needed: n_params, got: m });
    }
    let sse: f64 = model_values.iter().zip(data_values).map(|(f, y)| (f - y).powi(2)).sum();
    Ok(sse / (m - n_params) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitBounds {
    pub tau0_min: f64,
    pub tau0_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Seed points along `log tau0`.
    pub tau0_points: usize,
    /// Seed points along `gamma`.
    pub gamma_points: usize,
    /// How many of the best seeds are refined.
    pub refine_seeds: usize,
}

impl Default for FitBounds {
    fn default() -> Self {
        FitBounds {
            tau0_min: 1e-3,
            tau0_max: 1e3,
            gamma_min: 0.1,
            gamma_max: 3.0,
            tau0_points: 25,
            gamma_points: 25,
            refine_seeds: 4,
        }
    }
}

impl FitBounds {
    fn validate(&self) -> Result<()> {
        let ok = self.tau0_min > 0.0
            && self.tau0_max > self.tau0_min
            && self.gamma_min > 0.0
            && self.gamma_max > self.gamma_min
            && self.tau0_points >= 2
            && self.gamma_points >= 2
            && self.refine_seeds >= 1;
        if !ok {
            return Err(Error::Config(format!("invalid fit bounds {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryClass {
    /// `gamma < 1`
    Long,
    Short,
}

impl MemoryClass {
    pub fn of(gamma: f64) -> Self {
        if gamma < 1.0 {
            MemoryClass::Long
        } else {
            MemoryClass::Short
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: f64,
    pub tau0: f64,
    pub gamma: f64,
    pub chi2: f64,
    #[serde(rename = "M")]
    pub n_points: usize,
    pub n_params: usize,
    pub memory_class: MemoryClass,
    /// False when `tau0` and `gamma` are not determined by the data
    /// (zero amplitude or a solution pinned to the bounds).
    pub identifiable: bool,
    pub at_bound: bool,
}

impl FitResult {
    pub fn eval(&self, tau: f64) -> f64 {
        model(self.theta, self.tau0.ln(), self.gamma, tau)
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    u_bounds: (f64, f64),
    g_bounds: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Point {
    theta: f64,
    u: f64,
    gamma: f64,
    sse: f64,
}

impl Problem<'_> {
    fn sse(&self, theta: f64, u: f64, gamma: f64) -> f64 {
        self.x.iter().zip(self.y).map(|(&t, &y)| (model(theta, u, gamma, t) - y).powi(2)).sum()
    }

    /// Least-squares amplitude for fixed shape parameters.
    fn linear_theta(&self, u: f64, gamma: f64) -> f64 {
        let (mut gy, mut gg) = (0.0, 0.0);
        for (&t, &y) in self.x.iter().zip(self.y) {
            let g = model(1.0, u, gamma, t);
            gy += g * y;
            gg += g * g;
        }
        if gg > 0.0 {
            gy / gg
        } else {
            0.0
        }
    }

    fn profiled(&self, u: f64, gamma: f64) -> Point {
        let theta = self.linear_theta(u, gamma);
        Point {
            theta,
            u,
            gamma,
            sse: self.sse(theta, u, gamma),
        }
    }

    fn clamp(&self, u: f64, gamma: f64) -> (f64, f64) {
        (u.clamp(self.u_bounds.0, self.u_bounds.1), gamma.clamp(self.g_bounds.0, self.g_bounds.1))
    }

    /// Residuals and Jacobian in `(A, ln tau0, gamma)` with `A = theta tau0^gamma`,
    /// so `f = A (tau0^2 + tau^2)^(-gamma / 2)`. Unlike `theta`, the asymptotic
    /// amplitude `A` is nearly independent of `tau0` when `tau0` is small.
    fn residuals_and_jacobian(&self, amp: f64, u: f64, gamma: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.x.len();
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, N_PARAMS);
        let e2u = (2.0 * u).exp();
        for (k, (&t, &y)) in self.x.iter().zip(self.y).enumerate() {
            let s = e2u + t * t;
            let ls = s.ln();
            let g = (-0.5 * gamma * ls).exp();
            r[k] = amp * g - y;
            j[(k, 0)] = g;
            j[(k, 1)] = -amp * gamma * g * e2u / s;
            j[(k, 2)] = -0.5 * amp * ls * g;
        }
        (r, j)
    }

    /// Bounded Levenberg-Marquardt; never returns a point worse than `start`.
    fn refine(&self, start: Point) -> Point {
        let mut best = start;
        let mut lambda = 1e-3;
        for _ in 0..2000 {
            if best.sse == 0.0 {
                break;
            }
            let amp = best.theta * (best.gamma * best.u).exp();
            let (r, j) = self.residuals_and_jacobian(amp, best.u, best.gamma);
            let jtj = j.transpose() * &j;
            let m = r.len();
            let mut improved = false;
            while lambda <= 1e16 {
                let mut a = DMatrix::zeros(m + N_PARAMS, N_PARAMS);
                a.view_mut((0, 0), (m, N_PARAMS)).copy_from(&j);
                let mut rhs = DVector::zeros(m + N_PARAMS);
                rhs.rows_mut(0, m).copy_from(&(-&r));
                for c in 0..N_PARAMS {
                    a[(m + c, c)] = (lambda * jtj[(c, c)].max(1e-300)).sqrt();
                }
                let Ok(step) = a.svd(true, true).solve(&rhs, 1e-15) else {
                    lambda *= 10.0;
                    continue;
                };
                let (u, gamma) = self.clamp(best.u + step[1], best.gamma + step[2]);
                let theta = (amp + step[0]) * (-gamma * u).exp();
                let sse = self.sse(theta, u, gamma);
                if sse.is_finite() && sse < best.sse {
                    let gain = (best.sse - sse) / best.sse;
                    best = Point { theta, u, gamma, sse };
                    let profiled = self.profiled(u, gamma);
                    if profiled.sse < best.sse {
                        best = profiled;
                    }
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = gain > 1e-15;
                    break;
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        best
    }
}

/// Fits the power law to the defined points of `curve`.
pub fn fit_power_law(curve: &LagCurve, bounds: &FitBounds) -> Result<FitResult> {
    let pts = curve.defined_points();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_points(&x, &y, bounds)
}

/// Fits the power law to `(tau, value)` pairs.
pub fn fit_points(x: &[f64], y: &[f64], bounds: &FitBounds) -> Result<FitResult> {
    bounds.validate()?;
    if x.len() != y.len() {
        return Err(Error::Domain("lag and value counts differ".into()));
    }
    if x.len() <= N_PARAMS {
        return Err(Error::TooFewPoints { needed: N_PARAMS, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) || x.iter().any(|&t| t < 0.0) {
        return Err(Error::Domain("fit input must be finite with non-negative lags".into()));
    }
    let prob = Problem {
        x,
        y,
        u_bounds: (bounds.tau0_min.ln(), bounds.tau0_max.ln()),
        g_bounds: (bounds.gamma_min, bounds.gamma_max),
    };

    let mut seeds = Vec::with_capacity(bounds.tau0_points * bounds.gamma_points);
    for a in 0..bounds.tau0_points {
        let u = prob.u_bounds.0 + (prob.u_bounds.1 - prob.u_bounds.0) * a as f64 / (bounds.tau0_points - 1) as f64;
        for b in 0..bounds.gamma_points {
            let g = prob.g_bounds.0 + (prob.g_bounds.1 - prob.g_bounds.0) * b as f64 / (bounds.gamma_points - 1) as f64;
            seeds.push(prob.profiled(u, g));
        }
    }
    seeds.sort_by(|p, q| p.sse.total_cmp(&q.sse).then(p.u.total_cmp(&q.u)).then(p.gamma.total_cmp(&q.gamma)));

    let best = if seeds[0].theta == 0.0 {
        seeds[0]
    } else {
        seeds
            .iter()
            .take(bounds.refine_seeds)
            .map(|&s| prob.refine(s))
            .min_by(|p, q| p.sse.total_cmp(&q.sse))
            .expect("at least one seed")
    };

    let tol = 1e-9;
    let at_bound = (best.u - prob.u_bounds.0).abs() < tol
        || (best.u - prob.u_bounds.1).abs() < tol
        || (best.gamma - prob.g_bounds.0).abs() < tol
        || (best.gamma - prob.g_bounds.1).abs() < tol;
    let fitted: Vec<f64> = x.iter().map(|&t| model(best.theta, best.u, best.gamma, t)).collect();
    Ok(FitResult {
        theta: best.theta,
        tau0: best.u.exp(),
        gamma: best.gamma,
        chi2: normalized_chi2(&fitted, y, N_PARAMS)?,
        n_points: x.len(),
        n_params: N_PARAMS,
        memory_class: MemoryClass::of(best.gamma),
        identifiable: best.theta != 0.0 && !at_bound,
        at_bound,
    })
}
