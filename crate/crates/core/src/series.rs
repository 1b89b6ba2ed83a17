//! Monthly series container and the elementary transforms the rest of the
//! crate is built from: log differencing, sample variance, min-max scaling
//! and additive seasonal decomposition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearMonth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-positive value {value} at position {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
    #[error("negative {kind} value {value} at position {index}")]
    Negative { kind: Kind, index: usize, value: f64 },
    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Supply-chain tier an industry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Manufacturer,
    Wholesaler,
    Retailer,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Manufacturer, Stage::Wholesaler, Stage::Retailer];

    /// One-letter code used in panel files.
    pub fn code(self) -> &'static str {
        match self {
            Stage::Manufacturer => "M",
            Stage::Wholesaler => "W",
            Stage::Retailer => "R",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Manufacturer => "Manufacturer",
            Stage::Wholesaler => "Wholesaler",
            Stage::Retailer => "Retailer",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "manufacturer" => Ok(Stage::Manufacturer),
            "w" | "wholesaler" => Ok(Stage::Wholesaler),
            "r" | "retailer" => Ok(Stage::Retailer),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Demand,
    Inventory,
    Production,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Demand => "demand",
            Kind::Inventory => "inventory",
            Kind::Production => "production",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "demand" => Ok(Kind::Demand),
            "inventory" => Ok(Kind::Inventory),
            "production" => Ok(Kind::Production),
            _ => Err(s.to_string()),
        }
    }
}

/// Contiguous monthly observations for one industry and one quantity.
///
/// Values are finite, at least two long, and non-negative for demand and
/// inventory. Production may go negative when an inventory drawdown exceeds
/// shipments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    industry_id: String,
    stage: Stage,
    kind: Kind,
    start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(
        industry_id: impl Into<String>,
        stage: Stage,
        kind: Kind,
        start: YearMonth,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        if values.len() < 2 {
            return Err(SeriesError::TooShort { needed: 2, got: values.len() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::NonFinite { index });
            }
            if kind != Kind::Production && value < 0.0 {
                return Err(SeriesError::Negative { kind, index, value });
            }
        }
        Ok(Self { industry_id: industry_id.into(), stage, kind, start, values })
    }

    pub fn industry_id(&self) -> &str {
        &self.industry_id
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    /// Last covered month.
    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Month of the observation at `index`.
    pub fn period(&self, index: usize) -> YearMonth {
        self.start.add_months(index as i64)
    }

    /// Position of `ym` in the series, if covered.
    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        let k = self.start.months_until(ym);
        (k >= 0 && (k as usize) < self.values.len()).then_some(k as usize)
    }

    /// Same metadata, new values and start. Validation is re-run.
    pub fn with_values(&self, start: YearMonth, values: Vec<f64>) -> Result<Self, SeriesError> {
        Self::new(self.industry_id.clone(), self.stage, self.kind, start, values)
    }

    pub fn with_kind(&self, kind: Kind, start: YearMonth, values: Vec<f64>) -> Result<Self, SeriesError> {
        Self::new(self.industry_id.clone(), self.stage, kind, start, values)
    }

    /// Sub-series covering `[from, from + len)`.
    pub fn slice(&self, from: usize, len: usize) -> Result<Self, SeriesError> {
        let end = from + len;
        if end > self.values.len() {
            return Err(SeriesError::LengthMismatch { expected: self.values.len(), got: end });
        }
        self.with_values(self.period(from), self.values[from..end].to_vec())
    }
}

/// First differences of natural logarithms, `ln(x[k+1] / x[k])`, which is
/// exactly invariant to rescaling up to the rounding of the quotient.
pub fn log_diff(values: &[f64]) -> Result<Vec<f64>, SeriesError> {
    if values.len() < 2 {
        return Err(SeriesError::TooShort { needed: 2, got: values.len() });
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(SeriesError::NonPositiveValue { index, value });
    }
    Ok(values.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn sample_variance(x: &[f64]) -> Result<f64, SeriesError> {
    if x.len() < 2 {
        return Err(SeriesError::TooShort { needed: 2, got: x.len() });
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (x.len() - 1) as f64)
}

/// Affine map sending `lo` to 0 and `hi` to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxRecipe {
    pub lo: f64,
    pub hi: f64,
}

impl MinMaxRecipe {
    pub fn fit(x: &[f64]) -> Result<Self, SeriesError> {
        if x.is_empty() {
            return Err(SeriesError::TooShort { needed: 1, got: 0 });
        }
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(SeriesError::DegenerateRange(lo));
        }
        Ok(Self { lo, hi })
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * (self.hi - self.lo) + self.lo
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.scale(v)).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.unscale(v)).collect()
    }
}

/// Additive split of a series into trend, seasonal and residual parts.
///
/// `trend` and `residual` are `None` at the boundary positions where the
/// centered moving average is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub trend: Vec<Option<f64>>,
    /// One index per phase of the cycle; for monthly data `seasonal[m]` is the
    /// effect of calendar month `m` (0 = January).
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
    /// Phase of the first observation.
    pub phase: usize,
    head_fit: (f64, f64),
    tail_fit: (f64, f64),
}

const EXTRAPOLATION_SPAN: usize = 12;

impl DecompositionResult {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    pub fn period(&self) -> usize {
        self.seasonal.len()
    }

    /// Seasonal effect at position `k` (may lie beyond the sample).
    pub fn seasonal_at(&self, k: i64) -> f64 {
        let p = self.period() as i64;
        self.seasonal[(self.phase as i64 + k).rem_euclid(p) as usize]
    }

    /// Trend at position `k`. Outside the defined span the trend is
    /// extended linearly from the nearest twelve defined points.
    pub fn trend_at(&self, k: i64) -> f64 {
        if k >= 0 {
            if let Some(Some(t)) = self.trend.get(k as usize) {
                return *t;
            }
        }
        let first_defined = self.trend.iter().position(Option::is_some).unwrap_or(0) as i64;
        let (a, b) = if k < first_defined { self.head_fit } else { self.tail_fit };
        a + b * k as f64
    }

    /// Adds trend and seasonal back onto an in-sample sequence aligned with
    /// the decomposed series.
    pub fn recompose(&self, input: &[f64]) -> Result<Vec<f64>, SeriesError> {
        if input.len() != self.len() {
            return Err(SeriesError::LengthMismatch { expected: self.len(), got: input.len() });
        }
        Ok(self.recompose_at(0, input))
    }

    /// Adds trend and seasonal onto values starting at position `offset`;
    /// positions past the sample use the extrapolated trend.
    pub fn recompose_at(&self, offset: i64, input: &[f64]) -> Vec<f64> {
        input
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let k = offset + i as i64;
                self.trend_at(k) + self.seasonal_at(k) + v
            })
            .collect()
    }

    /// Recomposes a forecast covering the `input.len()` months right after
    /// the sample.
    pub fn recompose_ahead(&self, input: &[f64]) -> Vec<f64> {
        self.recompose_at(self.len() as i64, input)
    }

    /// Residual at every position, using the extrapolated trend where the
    /// moving average is undefined.
    pub fn filled_residual(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(k, v)| v - self.trend_at(k as i64) - self.seasonal_at(k as i64))
            .collect()
    }
}

/// Additive decomposition of a monthly series with period 12 by default.
pub fn decompose_additive(s: &MonthlySeries, period: usize) -> Result<DecompositionResult, SeriesError> {
    let phase = if period == 12 { s.start().month0() } else { 0 };
    decompose_values(s.values(), period, phase)
}

/// Additive decomposition of raw values.
///
/// Trend is the centered moving average (2×m for even periods), seasonal
/// indices are per-phase means of the detrended values re-centered to sum to
/// zero, residual is what remains.
pub fn decompose_values(values: &[f64], period: usize, phase: usize) -> Result<DecompositionResult, SeriesError> {
    let n = values.len();
    let needed = (2 * period).max(4);
    if period < 2 || n < needed {
        return Err(SeriesError::TooShort { needed, got: n });
    }
    let half = period / 2;
    let mut trend = vec![None; n];
    for k in half..n - half {
        let t = if period % 2 == 0 {
            let inner: f64 = values[k - half + 1..k + half].iter().sum();
            (0.5 * values[k - half] + inner + 0.5 * values[k + half]) / period as f64
        } else {
            values[k - half..=k + half].iter().sum::<f64>() / period as f64
        };
        trend[k] = Some(t);
    }

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (k, t) in trend.iter().enumerate() {
        if let Some(t) = t {
            let p = (phase + k) % period;
            sums[p] += values[k] - t;
            counts[p] += 1;
        }
    }
    let mut seasonal: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let centre = mean(&seasonal);
    seasonal.iter_mut().for_each(|v| *v -= centre);

    let residual = trend
        .iter()
        .enumerate()
        .map(|(k, t)| t.map(|t| values[k] - t - seasonal[(phase + k) % period]))
        .collect();

    let defined: Vec<(usize, f64)> = trend.iter().enumerate().filter_map(|(k, t)| t.map(|t| (k, t))).collect();
    let span = EXTRAPOLATION_SPAN.min(defined.len());
    let head_fit = line_fit(&defined[..span]);
    let tail_fit = line_fit(&defined[defined.len() - span..]);

    Ok(DecompositionResult { trend, seasonal, residual, phase, head_fit, tail_fit })
}

/// Least-squares intercept and slope through `(k, y)` points.
fn line_fit(points: &[(usize, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| *y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(k, _)| (*k as f64 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(k, y)| (*k as f64 - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}
