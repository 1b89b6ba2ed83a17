//! Synthetic data: seasonal series with demand shocks, a single-stage
//! order-up-to inventory simulator, and whole panels in the ingest format.
//!
//! The simulator works in whole units so that flow identities hold exactly
//! in floating point.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::YearMonth;
use crate::ingest::PANEL_HEADER;
use crate::series::{Kind, MonthlySeries, SeriesError, Stage};

/// Periods simulated and discarded before output starts.
pub const WARM_UP: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("need at least {needed} periods, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("generated value {value} at index {index} is not positive; raise the base level")]
    NonPositiveGenerated { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockShape {
    /// Permanent level shift from the onset.
    Step,
    /// Jump at the onset fading linearly over `decay_months`.
    Spike,
    /// Drop at the onset, recovering to an equal surge after `decay_months`,
    /// then fading over another `decay_months`.
    DipThenSurge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockProfile {
    pub onset: YearMonth,
    pub shape: ShockShape,
    /// Relative size; `0.3` is +30%.
    pub magnitude: f64,
    pub decay_months: usize,
}

impl ShockProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let dip_ok = self.shape != ShockShape::DipThenSurge || self.magnitude.abs() < 1.0;
        if self.magnitude > -1.0 && self.magnitude.is_finite() && dip_ok {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(format!("shock magnitude {} out of range", self.magnitude)))
        }
    }

    /// Relative level change `months` after the onset.
    pub fn effect(&self, months: i64) -> f64 {
        if months < 0 {
            return 0.0;
        }
        let m = months as f64;
        let d = self.decay_months as f64;
        match self.shape {
            ShockShape::Step => self.magnitude,
            ShockShape::Spike => {
                if d == 0.0 {
                    if months == 0 { self.magnitude } else { 0.0 }
                } else {
                    self.magnitude * (1.0 - m / d).max(0.0)
                }
            }
            ShockShape::DipThenSurge => {
                let a = self.magnitude.abs();
                if d == 0.0 {
                    return match months {
                        0 => -a,
                        1 => a,
                        _ => 0.0,
                    };
                }
                if m <= d {
                    -a + 2.0 * a * m / d
                } else {
                    a * (1.0 - (m - d) / d).max(0.0)
                }
            }
        }
    }
}

/// Level, trend, season and noise of a generated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub base: f64,
    pub trend_slope: f64,
    pub seasonal_amp: f64,
    pub noise_sd: f64,
    pub shock: Option<ShockProfile>,
    pub start: YearMonth,
}

/// `(base + slope·t + amp·sin(2πt/12) + noise) · (1 + shock(t))`.
pub fn gen_values(spec: &SeriesSpec, n: usize, seed: u64) -> Result<Vec<f64>, SynthError> {
    if n < 24 {
        return Err(SynthError::TooShort { needed: 24, got: n });
    }
    if !(spec.noise_sd >= 0.0) {
        return Err(SynthError::InvalidConfig("noise_sd must be non-negative".into()));
    }
    if let Some(s) = &spec.shock {
        s.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let tf = t as f64;
        let level = spec.base + spec.trend_slope * tf + spec.seasonal_amp * (2.0 * PI * tf / 12.0).sin();
        let e = if spec.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let shock = spec.shock.map_or(0.0, |s| s.effect(s.onset.months_until(spec.start.add_months(t as i64))));
        let v = (level + e) * (1.0 + shock);
        if !(v > 0.0) {
            return Err(SynthError::NonPositiveGenerated { index: t, value: v });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn gen_series(
    spec: &SeriesSpec,
    n: usize,
    seed: u64,
    industry_id: &str,
    stage: Stage,
    kind: Kind,
) -> Result<MonthlySeries, SynthError> {
    let values = gen_values(spec, n, seed)?;
    Ok(MonthlySeries::new(industry_id, stage, kind, spec.start, values)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    /// Raise the inventory position to `(L+1+cover)·forecast + safety stock`.
    OrderUpTo,
    /// Order the forecast plus a fraction `alpha` of the gap between the
    /// order-up-to level and the position after ordering the forecast.
    Proportional { alpha: f64 },
    /// Order exactly the demand just observed.
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchelonConfig {
    pub demand_mean: f64,
    pub demand_sd: f64,
    pub lead_time: usize,
    /// Moving-average window of the demand forecast.
    pub forecast_window: usize,
    pub policy: OrderPolicy,
    /// Safety stock in units of `demand_sd · sqrt(L+1)`.
    pub safety_factor: f64,
    /// Extra months of forecast demand held as stock.
    pub cover: f64,
    pub seed: u64,
}

impl Default for EchelonConfig {
    fn default() -> Self {
        Self {
            demand_mean: 100.0,
            demand_sd: 10.0,
            lead_time: 2,
            forecast_window: 4,
            policy: OrderPolicy::OrderUpTo,
            safety_factor: 2.0,
            cover: 0.0,
            seed: 0,
        }
    }
}

impl EchelonConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if !(self.demand_sd >= 0.0) {
            return bad("demand_sd must be non-negative");
        }
        if !(self.demand_mean > 3.0 * self.demand_sd) {
            return bad("demand_mean must exceed 3 * demand_sd");
        }
        if self.forecast_window == 0 {
            return bad("forecast_window must be at least 1");
        }
        if !(self.safety_factor >= 0.0) {
            return bad("safety_factor must be non-negative");
        }
        if !(self.cover >= 0.0) {
            return bad("cover must be non-negative");
        }
        if let OrderPolicy::Proportional { alpha } = self.policy {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return bad("alpha must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Simulated periods after warm-up. Quantities are whole units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchelonRun {
    /// Customer demand.
    pub demand: Vec<f64>,
    /// Units shipped: `min(demand, stock on hand)`; the rest is lost.
    pub shipments: Vec<f64>,
    /// End-of-period stock on hand.
    pub inventory: Vec<f64>,
    /// Orders placed at the end of each period.
    pub orders: Vec<f64>,
    /// Units arriving at the start of each period.
    pub receipts: Vec<f64>,
    /// Stock on hand at the end of the last warm-up period.
    pub initial_inventory: f64,
}

impl EchelonRun {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }
}

/// Runs the stock policy against a given demand path (whole units). Orders
/// placed at the end of period `t` arrive at the start of `t + L + 1`. The
/// first `warm_up` periods are simulated but not returned.
pub fn run_policy(cfg: &EchelonConfig, demand: &[f64], warm_up: usize) -> Result<EchelonRun, SynthError> {
    cfg.validate()?;
    if demand.len() <= warm_up {
        return Err(SynthError::TooShort { needed: warm_up + 1, got: demand.len() });
    }
    let l = cfg.lead_time;
    let mean0 = demand[..cfg.forecast_window.min(demand.len())].iter().sum::<f64>() / cfg.forecast_window.min(demand.len()) as f64;
    let safety = (cfg.safety_factor * cfg.demand_sd * ((l + 1) as f64).sqrt()).round();
    // pipeline[k] arrives k periods from now (k = 1..=L+1 after the shift).
    let mut pipeline: Vec<f64> = vec![mean0.round(); l + 1];
    let mut on_hand = (mean0 * (1.0 + cfg.cover) + safety).round();
    let mut history: Vec<f64> = Vec::with_capacity(demand.len());

    let mut run = EchelonRun {
        demand: Vec::new(),
        shipments: Vec::new(),
        inventory: Vec::new(),
        orders: Vec::new(),
        receipts: Vec::new(),
        initial_inventory: 0.0,
    };
    for (t, &d) in demand.iter().enumerate() {
        if t == warm_up {
            run.initial_inventory = on_hand;
        }
        let receipt = pipeline.remove(0);
        on_hand += receipt;
        let shipped = d.min(on_hand);
        on_hand -= shipped;
        history.push(d);

        let p = cfg.forecast_window.min(history.len());
        let forecast = history[history.len() - p..].iter().sum::<f64>() / p as f64;
        let target = (l as f64 + 1.0 + cfg.cover) * forecast + safety;
        let position = on_hand + pipeline.iter().sum::<f64>();
        let order = match cfg.policy {
            OrderPolicy::PassThrough => d,
            OrderPolicy::OrderUpTo => (target - position).max(0.0).round(),
            OrderPolicy::Proportional { alpha } => {
                (forecast + alpha * (target - position - forecast)).max(0.0).round()
            }
        };
        pipeline.push(order);

        if t >= warm_up {
            run.demand.push(d);
            run.shipments.push(shipped);
            run.inventory.push(on_hand);
            run.orders.push(order);
            run.receipts.push(receipt);
        }
    }
    Ok(run)
}

/// Draws `n + WARM_UP` periods of normal demand truncated at zero and
/// rounded to whole units, runs the policy and returns the last `n`.
pub fn simulate_echelon(cfg: &EchelonConfig, n: usize) -> Result<EchelonRun, SynthError> {
    if n < 60 {
        return Err(SynthError::TooShort { needed: 60, got: n });
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(cfg.demand_mean, cfg.demand_sd).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let demand: Vec<f64> = (0..n + WARM_UP)
        .map(|_| if cfg.demand_sd > 0.0 { normal.sample(&mut rng).max(0.0).round() } else { cfg.demand_mean.round() })
        .collect();
    run_policy(cfg, &demand, WARM_UP)
}

/// Panel rows for one industry: demand is what was shipped.
pub fn panel_rows(run: &EchelonRun, industry_id: &str, stage: Stage, start: YearMonth) -> String {
    let mut out = String::new();
    for (kind, values) in [(Kind::Demand, &run.shipments), (Kind::Inventory, &run.inventory)] {
        for (t, v) in values.iter().enumerate() {
            out.push_str(&format!("{industry_id},{},{kind},{},{v}\n", stage.code(), start.add_months(t as i64)));
        }
    }
    out
}

/// Layout of a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelConfig {
    pub manufacturers: usize,
    pub wholesalers: usize,
    pub retailers: usize,
    pub months: usize,
    pub start: YearMonth,
    pub shock: Option<ShockProfile>,
    pub seed: u64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        let ym = |y, m| YearMonth::new(y, m).expect("valid month");
        Self {
            manufacturers: 51,
            wholesalers: 19,
            retailers: 7,
            months: 384,
            start: ym(1992, 1),
            shock: Some(ShockProfile { onset: ym(2020, 3), shape: ShockShape::DipThenSurge, magnitude: 0.25, decay_months: 9 }),
            seed: 2024,
        }
    }
}

impl PanelConfig {
    /// Errors name the offending key.
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |key: &str, reason: String| Err(SynthError::InvalidConfig(format!("{key}: {reason}")));
        if self.months < 60 {
            return bad("months", format!("need at least 60, got {}", self.months));
        }
        if self.manufacturers + self.wholesalers + self.retailers == 0 {
            return bad("manufacturers", "at least one industry is required".into());
        }
        if let Some(shock) = &self.shock {
            if let Err(SynthError::InvalidConfig(reason)) = shock.validate() {
                return bad("shock.magnitude", reason);
            }
        }
        Ok(())
    }
}

/// Industry panel CSV in the ingest format. Each industry draws its own
/// seasonal demand path (with the shared shock) and inventory policy: about
/// a third of industries use a damped proportional rule, the rest
/// order-up-to; lead times and forecast windows are random. Every industry
/// keeps two to three extra months of forecast demand in stock.
pub fn synthetic_panel(cfg: &PanelConfig) -> Result<String, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = String::from(PANEL_HEADER);
    out.push('\n');
    let stages = [(Stage::Manufacturer, cfg.manufacturers), (Stage::Wholesaler, cfg.wholesalers), (Stage::Retailer, cfg.retailers)];
    for (stage, count) in stages {
        for k in 1..=count {
            let id = format!("{}{k:02}", stage.code());
            let base = rng.random_range(500.0..20_000.0_f64).round();
            let spec = SeriesSpec {
                base,
                trend_slope: base * rng.random_range(-0.001..0.004),
                seasonal_amp: base * rng.random_range(0.0..0.15),
                noise_sd: base * rng.random_range(0.02..0.08),
                shock: cfg.shock.map(|s| ShockProfile { magnitude: s.magnitude * rng.random_range(0.2..1.5), ..s }),
                start: cfg.start.add_months(-(WARM_UP as i64)),
            };
            let series_seed: u64 = rng.random();
            let demand: Vec<f64> = gen_values(&spec, cfg.months + WARM_UP, series_seed)?.iter().map(|v| v.round()).collect();
            let damped = rng.random_bool(1.0 / 3.0);
            let policy = EchelonConfig {
                demand_mean: base,
                demand_sd: spec.noise_sd,
                lead_time: rng.random_range(0..=3),
                forecast_window: if damped { rng.random_range(4..=10) } else { rng.random_range(2..=8) },
                policy: if damped {
                    OrderPolicy::Proportional { alpha: rng.random_range(0.25..0.5) }
                } else {
                    OrderPolicy::OrderUpTo
                },
                safety_factor: 2.0,
                cover: rng.random_range(2.0..3.0),
                seed: series_seed,
            };
            let run = run_policy(&policy, &demand, WARM_UP)?;
            out.push_str(&panel_rows(&run, &id, stage, cfg.start));
        }
    }
    Ok(out)
}
