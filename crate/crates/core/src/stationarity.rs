//! Augmented Dickey-Fuller unit-root test.
//!
//! The test regression is
//! `Δx_t = α (+ β t) + γ x_{t-1} + Σ_{j=1..p} c_j Δx_{t-j} + e_t`
//! and the statistic is the OLS t-ratio of `γ`. Lag order is picked by AIC
//! over `0..=⌊12 (n/100)^{1/4}⌋` on a common estimation sample; critical
//! values come from MacKinnon's (2010) response surfaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ols;

/// Shortest series accepted by [`adf_test`].
pub const MIN_TEST_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdfError {
    #[error("series too short for the ADF regression: need more than {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("ADF design matrix is singular (constant or collinear series)")]
    SingularDesign,
    #[error("ADF regression fits perfectly; t-ratio undefined")]
    PerfectFit,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regression {
    #[default]
    Constant,
    ConstantTrend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "1%")]
    One,
    #[default]
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "10%")]
    Ten,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdfConfig {
    pub regression: Regression,
    pub significance: Significance,
    /// Overrides the Schwert upper bound on the lag search.
    pub max_lags: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub nobs: usize,
    pub crit_1: f64,
    pub crit_5: f64,
    pub crit_10: f64,
    pub reject_unit_root: bool,
}

// MacKinnon (2010), one variable: rows are 1%, 5%, 10%; columns are the
// response-surface coefficients for 1, 1/T, 1/T^2, 1/T^3.
const CRIT_CONSTANT: [[f64; 4]; 3] = [
    [-3.43035, -6.5393, -16.786, -79.433],
    [-2.86154, -2.8903, -4.234, -40.040],
    [-2.56677, -1.5384, -2.809, 0.0],
];
const CRIT_CONSTANT_TREND: [[f64; 4]; 3] = [
    [-3.95877, -9.0531, -28.428, -134.155],
    [-3.41049, -4.3904, -9.036, -45.374],
    [-3.12705, -2.5856, -3.925, -22.380],
];

/// Critical values at 1%, 5% and 10% for a regression on `nobs` rows.
pub fn critical_values(regression: Regression, nobs: usize) -> [f64; 3] {
    let table = match regression {
        Regression::Constant => &CRIT_CONSTANT,
        Regression::ConstantTrend => &CRIT_CONSTANT_TREND,
    };
    let inv = 1.0 / nobs as f64;
    table.map(|c| c[0] + c[1] * inv + c[2] * inv * inv + c[3] * inv * inv * inv)
}

/// Schwert's rule of thumb for the largest lag worth trying.
pub fn schwert_max_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn n_deterministic(regression: Regression) -> usize {
    match regression {
        Regression::Constant => 1,
        Regression::ConstantTrend => 2,
    }
}

/// Builds the test regression using rows whose dependent index (into the
/// differenced series) starts at `first`.
fn design(x: &[f64], lags: usize, regression: Regression, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = dx.len() - first;
    let det = n_deterministic(regression);
    let cols = 1 + lags + det;
    let mut m = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for r in 0..rows {
        let i = first + r;
        y[r] = dx[i];
        m[(r, 0)] = x[i];
        for j in 1..=lags {
            m[(r, j)] = dx[i - j];
        }
        m[(r, lags + 1)] = 1.0;
        if regression == Regression::ConstantTrend {
            m[(r, lags + 2)] = (r + 1) as f64;
        }
    }
    (m, y)
}

fn check_input(x: &[f64], lags: usize, regression: Regression) -> Result<(), AdfError> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(AdfError::NonFinite(i));
    }
    let needed = lags + 2 + n_deterministic(regression);
    if x.len() <= needed + 1 {
        return Err(AdfError::TooShort { needed: needed + 1, got: x.len() });
    }
    Ok(())
}

fn t_ratio(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, f64, usize), AdfError> {
    let fit = ols(m, y).ok_or(AdfError::SingularDesign)?;
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if fit.rss <= 1e-24 * scale {
        return Err(AdfError::PerfectFit);
    }
    let t = fit.coef[0] / fit.std_err(0);
    Ok((t, fit.rss, fit.nobs))
}

/// ADF t-statistic for a fixed lag order.
pub fn adf_statistic(x: &[f64], lags: usize, regression: Regression) -> Result<f64, AdfError> {
    check_input(x, lags, regression)?;
    let (m, y) = design(x, lags, regression, lags);
    t_ratio(&m, &y).map(|(t, _, _)| t)
}

/// Full test with AIC lag selection.
pub fn adf_test(x: &[f64], cfg: &AdfConfig) -> Result<AdfResult, AdfError> {
    if x.len() < MIN_TEST_LEN {
        return Err(AdfError::TooShort { needed: MIN_TEST_LEN, got: x.len() });
    }
    check_input(x, 0, cfg.regression)?;
    let n = x.len();
    let det = n_deterministic(cfg.regression);
    // keep at least half the sample for the regression
    let dof_cap = ((n - 1) / 2).saturating_sub(det + 1);
    let max_lag = cfg.max_lags.unwrap_or_else(|| schwert_max_lags(n)).min(dof_cap);

    let mut best: Option<(f64, usize)> = None;
    for lags in 0..=max_lag {
        let (m, y) = design(x, lags, cfg.regression, max_lag);
        let Some(fit) = ols(&m, &y) else { continue };
        if !(fit.rss > 0.0) {
            continue;
        }
        let nobs = fit.nobs as f64;
        let aic = nobs * (fit.rss / nobs).ln() + 2.0 * fit.coef.len() as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lags));
        }
    }
    let lags_used = best.map(|(_, l)| l).ok_or(AdfError::SingularDesign)?;
    let (m, y) = design(x, lags_used, cfg.regression, lags_used);
    let (statistic, _, nobs) = t_ratio(&m, &y)?;
    let [crit_1, crit_5, crit_10] = critical_values(cfg.regression, nobs);
    let threshold = match cfg.significance {
        Significance::One => crit_1,
        Significance::Five => crit_5,
        Significance::Ten => crit_10,
    };
    Ok(AdfResult { statistic, lags_used, nobs, crit_1, crit_5, crit_10, reject_unit_root: statistic < threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Closed-form simple-regression t-ratio of Δx on (1, x_{t-1}).
    fn simple_regression_t(x: &[f64]) -> f64 {
        let y: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let z = &x[..x.len() - 1];
        let n = y.len() as f64;
        let mz = z.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let szz: f64 = z.iter().map(|v| (v - mz).powi(2)).sum();
        let szy: f64 = z.iter().zip(&y).map(|(a, b)| (a - mz) * (b - my)).sum();
        let slope = szy / szz;
        let icept = my - slope * mz;
        let rss: f64 = z.iter().zip(&y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
        slope / (rss / (n - 2.0) / szz).sqrt()
    }

    #[test]
    fn constant_series_is_singular() {
        assert_eq!(adf_statistic(&[4.0; 30], 0, Regression::Constant), Err(AdfError::SingularDesign));
        assert_eq!(adf_statistic(&[4.0; 30], 2, Regression::Constant), Err(AdfError::SingularDesign));
    }

    #[test]
    fn ten_point_fixture_matches_hand_ols() {
        let x = [1.0, 2.0, 1.0, 3.0, 2.0, 4.0, 3.0, 5.0, 4.0, 6.0];
        let t = adf_statistic(&x, 0, Regression::Constant).unwrap();
        // golden value from an independent numpy least-squares computation
        assert!((t - (-1.1864302154801294)).abs() < 1e-10, "{t}");
        assert!((t - simple_regression_t(&x)).abs() < 1e-10);
    }

    #[test]
    fn white_noise_statistic() {
        let x = noise(200, 7);
        let t = adf_statistic(&x, 0, Regression::Constant).unwrap();
        assert!((t - simple_regression_t(&x)).abs() < 1e-9);
        assert!(t < -6.0, "{t}");
    }

    #[test]
    fn adf_test_decisions() {
        let wn = noise(300, 11);
        let r = adf_test(&wn, &AdfConfig::default()).unwrap();
        assert!(r.reject_unit_root, "{r:?}");
        let mut level = 0.0;
        let rw: Vec<f64> = noise(300, 12)
            .into_iter()
            .map(|e| {
                level += e;
                level
            })
            .collect();
        let r = adf_test(&rw, &AdfConfig::default()).unwrap();
        assert!(!r.reject_unit_root, "{r:?}");
        assert!(r.crit_1 < r.crit_5 && r.crit_5 < r.crit_10);
        assert_eq!(r.reject_unit_root, r.statistic < r.crit_5);
    }

    #[test]
    fn too_short() {
        assert!(matches!(adf_test(&[1.0; 10], &AdfConfig::default()), Err(AdfError::TooShort { .. })));
        assert!(matches!(adf_statistic(&[1.0, 2.0, 3.0], 0, Regression::Constant), Err(AdfError::TooShort { .. })));
    }

    #[test]
    fn critical_values_match_published_asymptotics() {
        let [c1, c5, c10] = critical_values(Regression::Constant, 100);
        assert!((c1 + 3.4975).abs() < 1e-3 && (c5 + 2.8909).abs() < 1e-3 && (c10 + 2.5824).abs() < 1e-3);
        let [c1, c5, c10] = critical_values(Regression::ConstantTrend, 100);
        assert!((c1 + 4.0523).abs() < 1e-3 && (c5 + 3.4553).abs() < 1e-3 && (c10 + 3.1533).abs() < 1e-3);
    }

    #[test]
    fn trend_regression_runs() {
        let x: Vec<f64> = noise(120, 3).iter().enumerate().map(|(k, e)| 0.5 * k as f64 + e).collect();
        let r = adf_test(&x, &AdfConfig { regression: Regression::ConstantTrend, ..Default::default() }).unwrap();
        assert!(r.reject_unit_root);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn affine_invariance(seed in 0u64..10_000, a in 0.01f64..100.0, b in -1e3f64..1e3, lags in 0usize..4) {
                let x = noise(80, seed);
                let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let tx = adf_statistic(&x, lags, Regression::Constant).unwrap();
                let ty = adf_statistic(&y, lags, Regression::Constant).unwrap();
                prop_assert!((tx - ty).abs() < 1e-8, "{} vs {}", tx, ty);
            }
        }
    }
}
