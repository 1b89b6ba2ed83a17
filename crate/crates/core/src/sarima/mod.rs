//! Seasonal ARIMA: `φ(L) Φ(L^m) (1-L)^d (1-L^m)^D X_t = c + θ(L) Θ(L^m) ε_t`.
//!
//! Estimation minimizes the conditional sum of squares (pre-sample residuals
//! fixed at zero) with a Nelder-Mead simplex started at the origin.
//! Parameters leaving the stationary/invertible region are rejected during
//! the search, and the final estimate is projected back by root flipping.
//! An intercept is estimated only when the model is not differenced, so
//! integrated models forecast without drift.

mod poly;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::mean;
use crate::stationarity::{adf_test, AdfConfig, AdfError};

pub use poly::{ar_is_stable, expand_ar, expand_ma, flip_ar, flip_ma, ma_is_invertible, reciprocal_roots};
use simplex::{minimize, SimplexOptions};

/// Maximum simplex iterations per fit.
pub const MAX_ITERATIONS: usize = 2000;
/// Relative spread of the simplex objective values treated as converged.
pub const REL_TOL: f64 = 1e-10;
/// Largest MA reciprocal-root modulus the optimizer may visit.
pub const MA_SEARCH_BOUND: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SarimaError {
    #[error("series too short for {spec}: need {needed} observations, got {got}")]
    TooShort { spec: SarimaSpec, needed: usize, got: usize },
    #[error("invalid order {0}: d + D must be at most 2 and each of p, q, P, Q at most 3")]
    InvalidSpec(SarimaSpec),
    #[error("{spec}: no convergence after {iterations} iterations (best CSS {})", best.css)]
    NonConvergence { spec: SarimaSpec, iterations: usize, best: Box<FittedSarima> },
    #[error("empty order grid")]
    EmptyGrid,
    #[error("forecast horizon must be at least 1")]
    ZeroHorizon,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("unit-root test failed: {0}")]
    Adf(#[from] AdfError),
}

/// Orders `(p, d, q)(P, D, Q)_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    pub m: usize,
}

impl std::fmt::Display for SarimaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{}){}",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.m
        )
    }
}

impl SarimaSpec {
    pub fn new(p: usize, d: usize, q: usize, seasonal_p: usize, seasonal_d: usize, seasonal_q: usize, m: usize) -> Self {
        Self { p, d, q, seasonal_p, seasonal_d, seasonal_q, m }
    }

    /// Non-seasonal ARIMA(p, d, q) with the default season length.
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self::new(p, d, q, 0, 0, 0, 12)
    }

    pub fn validate(&self) -> Result<(), SarimaError> {
        let ok = self.d + self.seasonal_d <= 2
            && self.p <= 3
            && self.q <= 3
            && self.seasonal_p <= 3
            && self.seasonal_q <= 3
            && self.m >= 1;
        if ok {
            Ok(())
        } else {
            Err(SarimaError::InvalidSpec(*self))
        }
    }

    pub fn has_intercept(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    /// Number of estimated mean-equation parameters.
    pub fn n_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.has_intercept())
    }

    /// Observations lost to differencing.
    pub fn diff_order(&self) -> usize {
        self.d + self.m * self.seasonal_d
    }

    /// First differenced index with a full AR history.
    fn ar_span(&self) -> usize {
        self.p + self.m * self.seasonal_p
    }

    fn min_len(&self) -> usize {
        let k = self.p + self.q + self.m * (self.seasonal_p + self.seasonal_q) + 1;
        (3 * k).max(self.diff_order() + self.ar_span() + 2)
    }
}

/// Fitted coefficients. `phi`/`seasonal_phi` are AR-side
/// (`1 - Σ φ_i L^i`), `theta`/`seasonal_theta` MA-side (`1 + Σ θ_i L^i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    pub spec: SarimaSpec,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub intercept: f64,
    /// Innovation variance.
    pub sigma2: f64,
}

impl SarimaModel {
    /// Model with every coefficient zero.
    pub fn zero(spec: SarimaSpec) -> Self {
        Self {
            spec,
            phi: vec![0.0; spec.p],
            theta: vec![0.0; spec.q],
            seasonal_phi: vec![0.0; spec.seasonal_p],
            seasonal_theta: vec![0.0; spec.seasonal_q],
            intercept: 0.0,
            sigma2: 0.0,
        }
    }

    pub fn ar_lags(&self) -> Vec<f64> {
        expand_ar(&self.phi, &self.seasonal_phi, self.spec.m)
    }

    pub fn ma_lags(&self) -> Vec<f64> {
        expand_ma(&self.theta, &self.seasonal_theta, self.spec.m)
    }

    /// Stationary AR factors and invertible MA factors.
    pub fn in_admissible_region(&self) -> bool {
        ar_is_stable(&self.phi)
            && ar_is_stable(&self.seasonal_phi)
            && ma_is_invertible(&self.theta)
            && ma_is_invertible(&self.seasonal_theta)
    }

    /// Region explored by the optimizer: admissible, with MA reciprocal roots
    /// kept at most [`MA_SEARCH_BOUND`] in modulus. Conditional residuals do
    /// not decay when an MA root sits on the unit circle, and the objective
    /// then rewards spurious near-cancelling fits.
    fn in_search_region(&self) -> bool {
        let ma_ok = |c: &[f64]| {
            let neg: Vec<f64> = c.iter().map(|b| -b).collect();
            poly::max_reciprocal_modulus(&neg) <= MA_SEARCH_BOUND
        };
        ar_is_stable(&self.phi) && ar_is_stable(&self.seasonal_phi) && ma_ok(&self.theta) && ma_ok(&self.seasonal_theta)
    }

    /// Root-flips every factor into the admissible region.
    pub fn project(&mut self) {
        self.phi = flip_ar(&self.phi);
        self.seasonal_phi = flip_ar(&self.seasonal_phi);
        self.theta = flip_ma(&self.theta);
        self.seasonal_theta = flip_ma(&self.seasonal_theta);
    }

    /// Long-run mean of the differenced series.
    pub fn differenced_mean(&self) -> f64 {
        let ar_sum: f64 = self.ar_lags().iter().sum();
        self.intercept / (1.0 - ar_sum)
    }

    fn to_params(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .phi
            .iter()
            .chain(&self.seasonal_phi)
            .chain(&self.theta)
            .chain(&self.seasonal_theta)
            .copied()
            .collect();
        if self.spec.has_intercept() {
            v.push(self.intercept);
        }
        v
    }

    fn from_params(spec: SarimaSpec, params: &[f64]) -> Self {
        let mut it = params.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (&mut it).take(n).collect() };
        let phi = take(spec.p);
        let seasonal_phi = take(spec.seasonal_p);
        let theta = take(spec.q);
        let seasonal_theta = take(spec.seasonal_q);
        let intercept = if spec.has_intercept() { take(1)[0] } else { 0.0 };
        Self { spec, phi, theta, seasonal_phi, seasonal_theta, intercept, sigma2: 0.0 }
    }
}

/// A fitted model together with its objective values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSarima {
    pub model: SarimaModel,
    pub css: f64,
    /// Residuals entering the objective.
    pub n_effective: usize,
    pub iterations: usize,
}

impl FittedSarima {
    /// `n ln(CSS / n) + 2k`.
    pub fn aic(&self) -> f64 {
        let n = self.n_effective as f64;
        n * (self.css / n).ln() + 2.0 * self.model.spec.n_params() as f64
    }
}

/// Applies `(1 - L)^d (1 - L^m)^D`.
pub fn difference(x: &[f64], d: usize, seasonal_d: usize, m: usize) -> Vec<f64> {
    let mut w = x.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    for _ in 0..seasonal_d {
        if w.len() <= m {
            return Vec::new();
        }
        w = (m..w.len()).map(|t| w[t] - w[t - m]).collect();
    }
    w
}

/// One-step residuals on the differenced series. Entries before the AR span
/// are zero and do not count towards the objective.
fn residuals(model: &SarimaModel, ar: &[f64], ma: &[f64], w: &[f64]) -> Vec<f64> {
    let start = ar.len();
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut pred = model.intercept;
        for (k, a) in ar.iter().enumerate() {
            pred += a * w[t - 1 - k];
        }
        for (k, b) in ma.iter().enumerate() {
            if t > k {
                pred += b * e[t - 1 - k];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

/// Conditional sum of squares on an already differenced series.
pub fn css_objective(model: &SarimaModel, differenced: &[f64]) -> Result<f64, SarimaError> {
    let ar = model.ar_lags();
    if differenced.len() <= ar.len() {
        return Err(SarimaError::TooShort { spec: model.spec, needed: ar.len() + 1, got: differenced.len() });
    }
    let ma = model.ma_lags();
    let e = residuals(model, &ar, &ma, differenced);
    Ok(e[ar.len()..].iter().map(|v| v * v).sum())
}

fn check_finite(x: &[f64]) -> Result<(), SarimaError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(SarimaError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Estimates a SARIMA model on the undifferenced `series` by CSS.
pub fn fit_sarima(series: &[f64], spec: SarimaSpec) -> Result<FittedSarima, SarimaError> {
    spec.validate()?;
    check_finite(series)?;
    let needed = spec.min_len();
    if series.len() < needed {
        return Err(SarimaError::TooShort { spec, needed, got: series.len() });
    }
    let w = difference(series, spec.d, spec.seasonal_d, spec.m);
    let n_eff = w.len() - spec.ar_span();

    // Optimize on a unit-scale copy; coefficients are scale-free and the
    // intercept scales back linearly.
    let scale = {
        let rms = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
        if rms > 0.0 {
            rms
        } else {
            1.0
        }
    };
    let ws: Vec<f64> = w.iter().map(|v| v / scale).collect();

    let mut origin = SarimaModel::zero(spec);
    if spec.has_intercept() {
        origin.intercept = mean(&ws);
    }
    let origin_css = css_objective(&origin, &ws)?;

    let objective = |params: &[f64]| -> f64 {
        let candidate = SarimaModel::from_params(spec, params);
        if !candidate.in_search_region() {
            return f64::INFINITY;
        }
        css_objective(&candidate, &ws).unwrap_or(f64::INFINITY)
    };
    let opts = SimplexOptions { max_iter: MAX_ITERATIONS, rel_tol: REL_TOL, step: 0.1 };
    let mut outcome = minimize(objective, &origin.to_params(), &opts);
    // One restart from the optimum guards against a collapsed simplex.
    if outcome.converged && !outcome.best.is_empty() {
        let remaining = MAX_ITERATIONS.saturating_sub(outcome.iterations);
        let again = minimize(objective, &outcome.best, &SimplexOptions { max_iter: remaining, ..opts });
        if again.value <= outcome.value {
            outcome = simplex::SimplexOutcome {
                iterations: outcome.iterations + again.iterations,
                converged: again.converged,
                ..again
            };
        } else {
            outcome.iterations += again.iterations;
        }
    }

    let mut model = SarimaModel::from_params(spec, &outcome.best);
    let mut css = outcome.value;
    if !model.in_admissible_region() {
        model.project();
        css = css_objective(&model, &ws)?;
    }
    if !(css <= origin_css) {
        model = origin;
        css = origin_css;
    }
    model.intercept *= scale;
    let css = css * scale * scale;
    model.sigma2 = css / n_eff as f64;
    let fitted = FittedSarima { model, css, n_effective: n_eff, iterations: outcome.iterations };
    if outcome.converged {
        Ok(fitted)
    } else {
        Err(SarimaError::NonConvergence { spec, iterations: fitted.iterations, best: Box::new(fitted) })
    }
}

/// Candidate orders for [`select_sarima`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaGrid {
    pub p: Vec<usize>,
    pub d: Vec<usize>,
    pub q: Vec<usize>,
    #[serde(rename = "P")]
    pub seasonal_p: Vec<usize>,
    #[serde(rename = "D")]
    pub seasonal_d: Vec<usize>,
    #[serde(rename = "Q")]
    pub seasonal_q: Vec<usize>,
    pub m: usize,
}

impl SarimaGrid {
    /// `p, q ∈ {0,1,2}`, `P, Q ∈ {0,1}`, `D ∈ {0,1}`, with `d` fixed by an
    /// ADF test on the series (0 when the unit root is rejected, else 1).
    pub fn default_for(series: &[f64]) -> Result<Self, SarimaError> {
        let adf = adf_test(series, &AdfConfig::default())?;
        let d = if adf.reject_unit_root { 0 } else { 1 };
        Ok(Self::with_d(d))
    }

    pub fn with_d(d: usize) -> Self {
        Self {
            p: vec![0, 1, 2],
            d: vec![d],
            q: vec![0, 1, 2],
            seasonal_p: vec![0, 1],
            seasonal_d: vec![0, 1],
            seasonal_q: vec![0, 1],
            m: 12,
        }
    }

    /// All specs in lexicographic `(p, d, q, P, D, Q)` order.
    pub fn specs(&self) -> Vec<SarimaSpec> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &d in &self.d {
                for &q in &self.q {
                    for &sp in &self.seasonal_p {
                        for &sd in &self.seasonal_d {
                            for &sq in &self.seasonal_q {
                                out.push(SarimaSpec::new(p, d, q, sp, sd, sq, self.m));
                            }
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Picks the AIC-minimizing spec over `grid`. Ties go to fewer parameters,
/// then to the lexicographically smaller spec. Cells that fail to converge
/// are skipped; other fit errors abort the search.
pub fn select_sarima(series: &[f64], grid: &SarimaGrid) -> Result<FittedSarima, SarimaError> {
    let specs = grid.specs();
    if specs.is_empty() {
        return Err(SarimaError::EmptyGrid);
    }
    let mut best: Option<(f64, FittedSarima)> = None;
    let mut last_err = None;
    for spec in specs {
        let fitted = match fit_sarima(series, spec) {
            Ok(f) => f,
            Err(e @ SarimaError::NonConvergence { .. }) => {
                log::debug!("skipping {spec}: {e}");
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let aic = fitted.aic();
        if !aic.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, incumbent)) => {
                let tol = 1e-9 * b.abs().max(1.0);
                aic < b - tol || ((aic - b).abs() <= tol && spec.n_params() < incumbent.model.spec.n_params())
            }
        };
        if better {
            best = Some((aic, fitted));
        }
    }
    match (best, last_err) {
        (Some((_, f)), _) => Ok(f),
        (None, Some(e)) => Err(e),
        (None, None) => Err(SarimaError::EmptyGrid),
    }
}

/// Iterated conditional expectations of the differenced series, given its
/// observed history `w`. Future innovations are zero.
pub fn forecast_differenced(model: &SarimaModel, w: &[f64], horizon: usize) -> Vec<f64> {
    let ar = model.ar_lags();
    let ma = model.ma_lags();
    let mut e = if w.len() > ar.len() { residuals(model, &ar, &ma, w) } else { vec![0.0; w.len()] };
    let mut ext = w.to_vec();
    for _ in 0..horizon {
        let t = ext.len();
        let mut pred = model.intercept;
        for (k, a) in ar.iter().enumerate() {
            if t > k {
                pred += a * ext[t - 1 - k];
            }
        }
        for (k, b) in ma.iter().enumerate() {
            if t > k {
                pred += b * e[t - 1 - k];
            }
        }
        ext.push(pred);
        e.push(0.0);
    }
    ext.split_off(w.len())
}

/// Forecasts `horizon` steps beyond `history` (undifferenced), integrating
/// the differenced forecasts back through `(1 - L)^d (1 - L^m)^D`.
pub fn forecast_sarima(model: &SarimaModel, history: &[f64], horizon: usize) -> Result<Vec<f64>, SarimaError> {
    if horizon == 0 {
        return Err(SarimaError::ZeroHorizon);
    }
    check_finite(history)?;
    let spec = model.spec;
    let delta = poly::differencing(spec.d, spec.seasonal_d, spec.m);
    let lost = delta.len() - 1;
    if history.len() <= lost {
        return Err(SarimaError::TooShort { spec, needed: lost + 1, got: history.len() });
    }
    let w = difference(history, spec.d, spec.seasonal_d, spec.m);
    let wf = forecast_differenced(model, &w, horizon);
    let mut x = history.to_vec();
    for wt in wf {
        let t = x.len();
        let v = wt - (1..delta.len()).map(|i| delta[i] * x[t - i]).sum::<f64>();
        x.push(v);
    }
    Ok(x.split_off(history.len()))
}
