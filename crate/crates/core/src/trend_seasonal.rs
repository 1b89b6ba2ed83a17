//! Additive trend/seasonality forecaster: `y_t = g_t + s_t + h_t + ε_t` with
//! a piecewise-linear trend `g`, a Fourier seasonal term `s` and optional
//! event effects `h`, fitted by ridge-penalized least squares.
//!
//! Coefficients are stored in index units: `g(k) = b0 + k·rate + Σ δ_j (k - s_j)_+`
//! for observation index `k` counted from the start of the training series.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ridge;

/// Shortest series accepted by [`fit_trend_seasonal`].
pub const MIN_LEN: usize = 36;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrendSeasonalError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("design matrix is singular")]
    SingularDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeasonalConfig {
    pub n_changepoints: usize,
    /// Leading fraction of the training range where changepoints are placed.
    pub changepoint_range: f64,
    /// Requested number of Fourier pairs; clamped to the harmonics that are
    /// identifiable at integer sampling.
    pub fourier_order: usize,
    pub period: usize,
    /// Ridge penalty on each standardized changepoint column.
    pub delta_penalty: f64,
    /// Event name to the observation indices it affects. Indices past the
    /// training range flag future occurrences.
    pub holidays: BTreeMap<String, Vec<usize>>,
}

impl Default for TrendSeasonalConfig {
    fn default() -> Self {
        Self {
            n_changepoints: 25,
            changepoint_range: 0.8,
            fourier_order: 10,
            period: 12,
            delta_penalty: 0.05,
            holidays: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeasonalModel {
    pub base_rate: f64,
    pub offset: f64,
    /// Changepoint indices, strictly increasing.
    pub changepoints: Vec<usize>,
    pub deltas: Vec<f64>,
    /// `(a_n, b_n)` for `a_n cos(2πnk/P) + b_n sin(2πnk/P)`, `n = 1..`.
    pub fourier: Vec<(f64, f64)>,
    pub period: usize,
    pub holiday_effects: BTreeMap<String, f64>,
    pub holiday_indices: BTreeMap<String, Vec<usize>>,
    pub noise_sd: f64,
    /// Number of training observations.
    pub n_train: usize,
}

impl TrendSeasonalModel {
    pub fn trend(&self, k: usize) -> f64 {
        let t = k as f64;
        let hinge: f64 = self
            .changepoints
            .iter()
            .zip(&self.deltas)
            .map(|(&s, d)| d * (t - s as f64).max(0.0))
            .sum();
        self.offset + self.base_rate * t + hinge
    }

    pub fn seasonal(&self, k: usize) -> f64 {
        let p = self.period as f64;
        self.fourier
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let w = 2.0 * PI * (i + 1) as f64 * k as f64 / p;
                a * w.cos() + b * w.sin()
            })
            .sum()
    }

    pub fn holiday(&self, k: usize) -> f64 {
        self.holiday_effects
            .iter()
            .filter(|(name, _)| self.holiday_indices.get(*name).is_some_and(|idx| idx.contains(&k)))
            .map(|(_, e)| e)
            .sum()
    }

    /// Model mean at index `k`.
    pub fn value_at(&self, k: usize) -> f64 {
        self.trend(k) + self.seasonal(k) + self.holiday(k)
    }

    pub fn fitted(&self) -> Vec<f64> {
        (0..self.n_train).map(|k| self.value_at(k)).collect()
    }
}

/// Identifiable Fourier terms for an integer period: full pairs below the
/// Nyquist frequency, and a cosine-only term at it when the period is even.
fn harmonics(order: usize, period: usize) -> Vec<(usize, bool)> {
    (1..=order)
        .take_while(|&n| 2 * n <= period)
        .map(|n| (n, 2 * n < period))
        .collect()
}

/// Indices at uniform quantiles of the first `range` fraction of `0..n`,
/// excluding the origin.
fn place_changepoints(n: usize, count: usize, range: f64) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    let hist = ((n as f64 * range).floor() as usize).max(1);
    let last = (hist - 1) as f64;
    let mut cps: Vec<usize> = (1..=count)
        .map(|j| (last * j as f64 / count as f64).round() as usize)
        .filter(|&s| s > 0)
        .collect();
    cps.dedup();
    cps
}

pub fn fit_trend_seasonal(series: &[f64], config: &TrendSeasonalConfig) -> Result<TrendSeasonalModel, TrendSeasonalError> {
    let n = series.len();
    if n < MIN_LEN {
        return Err(TrendSeasonalError::TooShort { needed: MIN_LEN, got: n });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(TrendSeasonalError::NonFinite(i));
    }
    let y_scale = series.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let y_scale = if y_scale > 0.0 { y_scale } else { 1.0 };
    let t_scale = (n - 1) as f64;
    let period = config.period.max(1);

    let changepoints = place_changepoints(n, config.n_changepoints, config.changepoint_range);
    let harm = harmonics(config.fourier_order, period);
    let holidays: Vec<(&String, &Vec<usize>)> = config
        .holidays
        .iter()
        .filter(|(name, idx)| {
            let seen = idx.iter().any(|&k| k < n);
            if !seen {
                log::warn!("event {name} has no training occurrence; effect fixed at 0");
            }
            seen
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut penalty = Vec::new();
    let t: Vec<f64> = (0..n).map(|k| k as f64 / t_scale).collect();
    columns.push(vec![1.0; n]);
    columns.push(t.clone());
    penalty.extend([0.0, 0.0]);
    let mut hinge_sd = Vec::with_capacity(changepoints.len());
    for &s in &changepoints {
        let s = s as f64 / t_scale;
        let raw: Vec<f64> = t.iter().map(|ti| (ti - s).max(0.0)).collect();
        let sd = crate::series::sample_variance(&raw).map_or(0.0, f64::sqrt);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        columns.push(raw.iter().map(|v| v / sd).collect());
        hinge_sd.push(sd);
        penalty.push(config.delta_penalty);
    }
    for &(h, with_sine) in &harm {
        let w = 2.0 * PI * h as f64 / period as f64;
        columns.push((0..n).map(|k| (w * k as f64).cos()).collect());
        penalty.push(0.0);
        if with_sine {
            columns.push((0..n).map(|k| (w * k as f64).sin()).collect());
            penalty.push(0.0);
        }
    }
    for (_, idx) in &holidays {
        columns.push((0..n).map(|k| if idx.contains(&k) { 1.0 } else { 0.0 }).collect());
        penalty.push(0.0);
    }

    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let y = DVector::from_iterator(n, series.iter().map(|v| v / y_scale));
    let coef = ridge(&x, &y, &penalty).ok_or(TrendSeasonalError::SingularDesign)?;

    let mut at = 0;
    let mut next = || {
        let c = coef[at];
        at += 1;
        c * y_scale
    };
    let offset = next();
    let base_rate = next() / t_scale;
    let deltas: Vec<f64> = hinge_sd.iter().map(|sd| next() / sd / t_scale).collect();
    let fourier: Vec<(f64, f64)> = harm
        .iter()
        .map(|&(_, with_sine)| {
            let a = next();
            let b = if with_sine { next() } else { 0.0 };
            (a, b)
        })
        .collect();
    let mut holiday_effects: BTreeMap<String, f64> = config.holidays.keys().map(|k| (k.clone(), 0.0)).collect();
    for (name, _) in &holidays {
        holiday_effects.insert((*name).clone(), next());
    }

    let mut model = TrendSeasonalModel {
        base_rate,
        offset,
        changepoints,
        deltas,
        fourier,
        period,
        holiday_effects,
        holiday_indices: config.holidays.clone(),
        noise_sd: 0.0,
        n_train: n,
    };
    let resid: Vec<f64> = series.iter().zip(model.fitted()).map(|(a, f)| a - f).collect();
    model.noise_sd = crate::series::sample_variance(&resid).map_or(0.0, f64::sqrt);
    Ok(model)
}

/// Mean forecasts for the `horizon` indices following the training range.
pub fn forecast_trend_seasonal(model: &TrendSeasonalModel, horizon: usize) -> Vec<f64> {
    (model.n_train..model.n_train + horizon).map(|k| model.value_at(k)).collect()
}
