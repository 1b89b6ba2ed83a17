//! Bullwhip measurement: production inferred from shipments and inventory,
//! variance amplification of log-differenced production over demand, and
//! the four-zone comparison of forecast-side against actual ratios.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{MonthRange, YearMonth};
use crate::series::{log_diff, sample_variance, Kind, MonthlySeries, SeriesError, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BullwhipError {
    #[error("series are not aligned: {0}")]
    Misaligned(String),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{what} value {value} at {period} is not positive")]
    NonPositiveValue { what: &'static str, period: YearMonth, value: f64 },
    #[error("demand has zero variance over the window")]
    ZeroDemandVariance,
    #[error("{what} does not cover {window}")]
    WindowNotCovered { what: &'static str, window: MonthRange },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("annotations line {line}: {reason}")]
    Annotation { line: usize, reason: String },
}

/// `Y_t = S_t + I_t - I_{t-1}` for `t = 1..n`.
pub fn production_values(shipments: &[f64], inventory: &[f64]) -> Result<Vec<f64>, BullwhipError> {
    if shipments.len() != inventory.len() {
        return Err(BullwhipError::Misaligned(format!(
            "{} shipments vs {} inventory values",
            shipments.len(),
            inventory.len()
        )));
    }
    if shipments.len() < 2 {
        return Err(BullwhipError::TooShort { needed: 2, got: shipments.len() });
    }
    Ok(shipments[1..]
        .iter()
        .zip(inventory.windows(2))
        .map(|(s, i)| s + (i[1] - i[0]))
        .collect())
}

/// Production series starting one month after the inputs. Values may be
/// negative when inventory falls by more than was shipped.
pub fn infer_production(shipments: &MonthlySeries, inventory: &MonthlySeries) -> Result<MonthlySeries, BullwhipError> {
    if shipments.start() != inventory.start() || shipments.len() != inventory.len() {
        return Err(BullwhipError::Misaligned(format!(
            "shipments {}..{} vs inventory {}..{}",
            shipments.start(),
            shipments.end(),
            inventory.start(),
            inventory.end()
        )));
    }
    let values = production_values(shipments.values(), inventory.values())?;
    Ok(shipments.with_kind(Kind::Production, shipments.start().add_months(1), values)?)
}

/// `Var(Δ ln p) / Var(Δ ln d)` on aligned positive values.
pub fn ratio_of_values(production: &[f64], demand: &[f64]) -> Result<f64, BullwhipError> {
    if production.len() != demand.len() {
        return Err(BullwhipError::Misaligned(format!("{} production vs {} demand values", production.len(), demand.len())));
    }
    if demand.len() < 3 {
        return Err(BullwhipError::TooShort { needed: 3, got: demand.len() });
    }
    let vd = sample_variance(&log_diff(demand)?)?;
    if vd == 0.0 {
        return Err(BullwhipError::ZeroDemandVariance);
    }
    let vp = sample_variance(&log_diff(production)?)?;
    Ok(vp / vd)
}

fn window_values(s: &MonthlySeries, window: MonthRange, what: &'static str) -> Result<Vec<f64>, BullwhipError> {
    let from = s.index_of(window.start).ok_or(BullwhipError::WindowNotCovered { what, window })?;
    s.index_of(window.end).ok_or(BullwhipError::WindowNotCovered { what, window })?;
    let values = s.values()[from..from + window.len()].to_vec();
    if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(BullwhipError::NonPositiveValue { what, period: window.start.add_months(k as i64), value: *v });
    }
    Ok(values)
}

/// Amplification ratio of `production` over `demand` restricted to `window`.
pub fn amplification_ratio(production: &MonthlySeries, demand: &MonthlySeries, window: MonthRange) -> Result<f64, BullwhipError> {
    if window.len() < 3 {
        return Err(BullwhipError::TooShort { needed: 3, got: window.len() });
    }
    let p = window_values(production, window, "production")?;
    let d = window_values(demand, window, "demand")?;
    ratio_of_values(&p, &d)
}

/// Forecast-vs-actual bullwhip zone; a ratio above 1 signals bullwhip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    /// (+,+)
    TruePositive,
    /// (−,−)
    TrueNegative,
    /// (+,−)
    FalsePositive,
    /// (−,+)
    FalseNegative,
}

impl Zone {
    pub const ALL: [Zone; 4] = [Zone::TruePositive, Zone::TrueNegative, Zone::FalsePositive, Zone::FalseNegative];

    pub fn label(self) -> &'static str {
        match self {
            Zone::TruePositive => "Accurately Forecasted Bullwhip",
            Zone::TrueNegative => "Accurately Forecasted No Bullwhip",
            Zone::FalsePositive => "False Positive Bullwhip",
            Zone::FalseNegative => "False Negative Bullwhip",
        }
    }

    pub fn signs(self) -> &'static str {
        match self {
            Zone::TruePositive => "(+,+)",
            Zone::TrueNegative => "(-,-)",
            Zone::FalsePositive => "(+,-)",
            Zone::FalseNegative => "(-,+)",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::TruePositive => "true_positive",
            Zone::TrueNegative => "true_negative",
            Zone::FalsePositive => "false_positive",
            Zone::FalseNegative => "false_negative",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_zone(forecast_ratio: f64, actual_ratio: f64) -> Zone {
    match (forecast_ratio > 1.0, actual_ratio > 1.0) {
        (true, true) => Zone::TruePositive,
        (false, false) => Zone::TrueNegative,
        (true, false) => Zone::FalsePositive,
        (false, true) => Zone::FalseNegative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    UndefinedRatio,
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordStatus::Ok => "ok",
            RecordStatus::UndefinedRatio => "undefined_ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationRecord {
    pub industry_id: String,
    pub stage: Stage,
    pub forecast_ratio: Option<f64>,
    pub actual_ratio: Option<f64>,
    pub zone: Option<Zone>,
    pub status: RecordStatus,
    /// Why a ratio is undefined.
    pub note: Option<String>,
}

impl AmplificationRecord {
    /// Combines the two ratio computations; any failure leaves the record
    /// unclassified with the reason attached.
    pub fn new(
        industry_id: impl Into<String>,
        stage: Stage,
        forecast: Result<f64, BullwhipError>,
        actual: Result<f64, BullwhipError>,
    ) -> Self {
        let mut notes = Vec::new();
        let forecast_ratio = forecast.map_err(|e| notes.push(format!("forecast: {e}"))).ok();
        let actual_ratio = actual.map_err(|e| notes.push(format!("actual: {e}"))).ok();
        let zone = match (forecast_ratio, actual_ratio) {
            (Some(f), Some(a)) => Some(classify_zone(f, a)),
            _ => None,
        };
        Self {
            industry_id: industry_id.into(),
            stage,
            forecast_ratio,
            actual_ratio,
            zone,
            status: if zone.is_some() { RecordStatus::Ok } else { RecordStatus::UndefinedRatio },
            note: (!notes.is_empty()).then(|| notes.join("; ")),
        }
    }
}

pub const RATIOS_HEADER: &str = "industry_id,stage,forecast_ratio,actual_ratio,zone,status";

fn opt_cell<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-industry ratio table, one row per record in the given order.
pub fn ratios_csv(records: &[AmplificationRecord]) -> String {
    let mut out = String::from(RATIOS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.industry_id,
            r.stage.code(),
            opt_cell(r.forecast_ratio),
            opt_cell(r.actual_ratio),
            opt_cell(r.zone),
            r.status
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneCell {
    pub zone: Zone,
    pub count: usize,
    /// Exact share of the row total, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRow {
    /// Stage name, or `"Total"`.
    pub stage: String,
    pub total: usize,
    pub cells: Vec<ZoneCell>,
}

impl ZoneRow {
    fn from_counts(stage: String, counts: [usize; 4]) -> Self {
        let total: usize = counts.iter().sum();
        let cells = Zone::ALL
            .iter()
            .zip(counts)
            .map(|(&zone, count)| ZoneCell {
                zone,
                count,
                percent: if total > 0 { 100.0 * count as f64 / total as f64 } else { 0.0 },
            })
            .collect();
        Self { stage, total, cells }
    }

    pub fn count(&self, zone: Zone) -> usize {
        self.cells.iter().find(|c| c.zone == zone).map_or(0, |c| c.count)
    }

    pub fn percent(&self, zone: Zone) -> f64 {
        self.cells.iter().find(|c| c.zone == zone).map_or(0.0, |c| c.percent)
    }
}

/// Zone counts per stage and overall. Unclassified records are counted
/// separately and excluded from the percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSummary {
    /// Stages in name order, only those with classified records.
    pub stages: Vec<ZoneRow>,
    pub total: ZoneRow,
    pub undefined: usize,
}

impl ZoneSummary {
    pub fn stage(&self, stage: Stage) -> Option<&ZoneRow> {
        self.stages.iter().find(|r| r.stage == stage.name())
    }

    /// Table with counts and one-decimal percentages.
    pub fn to_table(&self) -> String {
        let mut out = String::from("stage");
        for z in Zone::ALL {
            out.push_str(&format!(",{} {}", z.label(), z.signs()));
        }
        out.push_str(",total\n");
        for row in self.stages.iter().chain(std::iter::once(&self.total)) {
            out.push_str(&row.stage);
            for c in &row.cells {
                out.push_str(&format!(",{} ({:.1}%)", c.count, c.percent));
            }
            out.push_str(&format!(",{}\n", row.total));
        }
        out
    }
}

pub fn summarize_zones(records: &[AmplificationRecord]) -> ZoneSummary {
    let index = |z: Zone| Zone::ALL.iter().position(|&x| x == z).expect("listed zone");
    let mut by_stage: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    let mut total = [0usize; 4];
    let mut undefined = 0;
    for r in records {
        match r.zone {
            Some(z) => {
                by_stage.entry(r.stage.name().to_string()).or_default()[index(z)] += 1;
                total[index(z)] += 1;
            }
            None => undefined += 1,
        }
    }
    ZoneSummary {
        stages: by_stage.into_iter().map(|(s, c)| ZoneRow::from_counts(s, c)).collect(),
        total: ZoneRow::from_counts("Total".into(), total),
        undefined,
    }
}

/// Free-text demand and supply shock notes for one industry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub demand_shock: String,
    pub supply_shock: String,
}

pub const ANNOTATIONS_HEADER: &str = "industry_id,demand_shock,supply_shock";

pub fn parse_annotations(text: &str) -> Result<BTreeMap<String, Annotation>, BullwhipError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == ANNOTATIONS_HEADER => {}
        Some((i, h)) => {
            return Err(BullwhipError::Annotation { line: i + 1, reason: format!("expected header {ANNOTATIONS_HEADER:?}, got {h:?}") })
        }
        None => return Ok(BTreeMap::new()),
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, demand, supply] = fields[..] else {
            return Err(BullwhipError::Annotation { line: i + 1, reason: format!("expected 3 fields, got {}", fields.len()) });
        };
        if id.is_empty() {
            return Err(BullwhipError::Annotation { line: i + 1, reason: "empty industry id".into() });
        }
        out.insert(id.to_string(), Annotation { demand_shock: demand.into(), supply_shock: supply.into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ym(y: i32, m: u8) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    fn series(kind: Kind, start: YearMonth, values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::new("x", Stage::Retailer, kind, start, values).unwrap()
    }

    /// Sample variance with explicit loops.
    fn brute_variance(x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for v in x {
            sum += v;
        }
        let m = sum / x.len() as f64;
        let mut ss = 0.0;
        for v in x {
            ss += (v - m) * (v - m);
        }
        ss / (x.len() - 1) as f64
    }

    fn brute_ratio(p: &[f64], d: &[f64]) -> f64 {
        let ld = |x: &[f64]| -> Vec<f64> { (1..x.len()).map(|t| x[t].ln() - x[t - 1].ln()).collect() };
        brute_variance(&ld(p)) / brute_variance(&ld(d))
    }

    #[test]
    fn production_examples() {
        assert_eq!(production_values(&[5.0, 6.0, 7.0], &[10.0, 10.0, 10.0]).unwrap(), vec![6.0, 7.0]);
        assert_eq!(production_values(&[100.0, 110.0, 90.0], &[50.0, 60.0, 55.0]).unwrap(), vec![120.0, 85.0]);
        assert_eq!(production_values(&[4.0, 3.0], &[10.0, 2.0]).unwrap(), vec![-5.0]);
        assert!(matches!(production_values(&[1.0], &[1.0]), Err(BullwhipError::TooShort { .. })));
        assert!(matches!(production_values(&[1.0, 2.0], &[1.0]), Err(BullwhipError::Misaligned(_))));
    }

    #[test]
    fn production_series() {
        let s = series(Kind::Demand, ym(2020, 1), vec![5.0, 4.0, 3.0]);
        let i = series(Kind::Inventory, ym(2020, 1), vec![8.0, 10.0, 2.0]);
        let p = infer_production(&s, &i).unwrap();
        assert_eq!(p.kind(), Kind::Production);
        assert_eq!(p.start(), ym(2020, 2));
        assert_eq!(p.values(), &[6.0, -5.0]);
        let late = series(Kind::Inventory, ym(2020, 2), vec![8.0, 10.0, 2.0]);
        assert!(matches!(infer_production(&s, &late), Err(BullwhipError::Misaligned(_))));
    }

    #[test]
    fn identical_series_ratio_is_one() {
        let d: Vec<f64> = (0..24).map(|k| 100.0 + (k as f64 * 1.3).sin() * 10.0).collect();
        let w = MonthRange::new(ym(2020, 1), ym(2021, 12));
        let r = amplification_ratio(&series(Kind::Production, ym(2020, 1), d.clone()), &series(Kind::Demand, ym(2020, 1), d), w);
        assert_eq!(r.unwrap(), 1.0);
    }

    #[test]
    fn alternating_closed_form() {
        let d: Vec<f64> = (0..48).map(|k| if k % 2 == 0 { 100.0 } else { 110.0 }).collect();
        let p: Vec<f64> = (0..48).map(|k| if k % 2 == 0 { 100.0 } else { 120.0 }).collect();
        let w = MonthRange::new(ym(2020, 1), ym(2023, 12));
        let r = amplification_ratio(&series(Kind::Production, ym(2020, 1), p.clone()), &series(Kind::Demand, ym(2020, 1), d.clone()), w)
            .unwrap();
        let closed = (1.2f64.ln() / 1.1f64.ln()).powi(2);
        assert!((r - closed).abs() < 1e-6);
        assert!((r - 3.6592953460058064).abs() < 1e-9);
        assert!((r - brute_ratio(&p, &d)).abs() < 1e-12);
    }

    #[test]
    fn ratio_errors() {
        let w = MonthRange::new(ym(2020, 1), ym(2020, 12));
        let flat = series(Kind::Demand, ym(2020, 1), vec![50.0; 12]);
        let p = series(Kind::Production, ym(2020, 1), (0..12).map(|k| 50.0 + k as f64).collect());
        assert_eq!(amplification_ratio(&p, &flat, w), Err(BullwhipError::ZeroDemandVariance));
        let neg = series(Kind::Production, ym(2020, 1), (0..12).map(|k| if k == 4 { -1.0 } else { 5.0 + k as f64 }).collect());
        let d = series(Kind::Demand, ym(2020, 1), (0..12).map(|k| 5.0 + k as f64).collect());
        assert!(matches!(
            amplification_ratio(&neg, &d, w),
            Err(BullwhipError::NonPositiveValue { what: "production", value, .. }) if value == -1.0
        ));
        let wide = MonthRange::new(ym(2019, 12), ym(2020, 12));
        assert!(matches!(amplification_ratio(&p, &d, wide), Err(BullwhipError::WindowNotCovered { .. })));
        let tiny = MonthRange::new(ym(2020, 1), ym(2020, 2));
        assert!(matches!(amplification_ratio(&p, &d, tiny), Err(BullwhipError::TooShort { .. })));
    }

    #[test]
    fn zones() {
        assert_eq!(classify_zone(1.2, 1.5), Zone::TruePositive);
        assert_eq!(classify_zone(0.8, 1.5), Zone::FalseNegative);
        assert_eq!(classify_zone(1.0, 1.0), Zone::TrueNegative);
        assert_eq!(classify_zone(1.5, 0.5), Zone::FalsePositive);
        assert_eq!(Zone::TruePositive.label(), "Accurately Forecasted Bullwhip");
    }

    fn record(id: &str, stage: Stage, zone: Zone) -> AmplificationRecord {
        let (f, a) = match zone {
            Zone::TruePositive => (2.0, 2.0),
            Zone::TrueNegative => (0.5, 0.5),
            Zone::FalsePositive => (2.0, 0.5),
            Zone::FalseNegative => (0.5, 2.0),
        };
        AmplificationRecord::new(id, stage, Ok(f), Ok(a))
    }

    fn table2_fixture() -> Vec<AmplificationRecord> {
        let rows = [
            (Stage::Manufacturer, [12, 20, 1, 18]),
            (Stage::Retailer, [1, 5, 0, 1]),
            (Stage::Wholesaler, [8, 5, 1, 5]),
        ];
        let mut out = Vec::new();
        for (stage, counts) in rows {
            for (zone, n) in Zone::ALL.iter().zip(counts) {
                for k in 0..n {
                    out.push(record(&format!("{}{}{k}", stage.code(), zone.as_str()), stage, *zone));
                }
            }
        }
        out
    }

    #[test]
    fn table2_totals() {
        let s = summarize_zones(&table2_fixture());
        assert_eq!(s.total.total, 77);
        let expected = [(21, 27.3), (30, 39.0), (2, 2.6), (24, 31.2)];
        for (zone, (count, pct)) in Zone::ALL.iter().zip(expected) {
            assert_eq!(s.total.count(*zone), count);
            assert!((s.total.percent(*zone) - pct).abs() < 0.05);
        }
        let m = s.stage(Stage::Manufacturer).unwrap();
        assert_eq!(m.total, 51);
        assert!((m.percent(Zone::FalsePositive) - 1.9607843137254901).abs() < 1e-12);
        assert_eq!(s.stages.iter().map(|r| r.stage.as_str()).collect::<Vec<_>>(), ["Manufacturer", "Retailer", "Wholesaler"]);
        assert!(s.to_table().contains("Total,21 (27.3%),30 (39.0%),2 (2.6%),24 (31.2%),77"));
    }

    #[test]
    fn single_record_summary() {
        let s = summarize_zones(&[record("a", Stage::Retailer, Zone::FalseNegative)]);
        assert_eq!(s.total.percent(Zone::FalseNegative), 100.0);
        assert_eq!(s.total.count(Zone::TruePositive), 0);
    }

    #[test]
    fn undefined_records_are_reported_not_classified() {
        let bad = AmplificationRecord::new(
            "neg",
            Stage::Wholesaler,
            Ok(1.3),
            Err(BullwhipError::NonPositiveValue { what: "production", period: ym(2020, 4), value: -2.0 }),
        );
        assert_eq!(bad.status, RecordStatus::UndefinedRatio);
        assert_eq!(bad.zone, None);
        assert!(bad.note.as_deref().unwrap().starts_with("actual: production value -2"));
        let s = summarize_zones(&[bad.clone(), record("ok", Stage::Wholesaler, Zone::TruePositive)]);
        assert_eq!((s.undefined, s.total.total), (1, 1));
        let csv = ratios_csv(&[bad]);
        assert_eq!(csv, format!("{RATIOS_HEADER}\nneg,W,1.3,,,undefined_ratio\n"));
    }

    #[test]
    fn annotations() {
        let text = "industry_id,demand_shock,supply_shock\n33A,Less affected ↔,Negative ↓\n15S,Negative ↓,Negative ↓\n";
        let a = parse_annotations(text).unwrap();
        assert_eq!(a["33A"].supply_shock, "Negative ↓");
        assert_eq!(a.len(), 2);
        assert!(parse_annotations("id,x\n").is_err());
        assert!(parse_annotations("industry_id,demand_shock,supply_shock\n1,2\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_brute_force(
            pairs in proptest::collection::vec((0.5f64..500.0, 0.5f64..500.0), 4..60),
        ) {
            let (p, d): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(brute_variance(&(1..d.len()).map(|t| (d[t] / d[t - 1]).ln()).collect::<Vec<_>>()) > 0.0);
            let r = ratio_of_values(&p, &d).unwrap();
            let b = brute_ratio(&p, &d);
            prop_assert!((r - b).abs() <= 1e-12 * b.max(1.0), "{} vs {}", r, b);
        }

        #[test]
        fn scale_invariant(
            pairs in proptest::collection::vec((0.5f64..500.0, 0.5f64..500.0), 4..40),
            c in 1e-3f64..1e3,
            k in 1e-3f64..1e3,
        ) {
            let (p, d): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let Ok(base) = ratio_of_values(&p, &d) else { return Ok(()) };
            let sp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let sd: Vec<f64> = d.iter().map(|v| v * k).collect();
            let scaled = ratio_of_values(&sp, &sd).unwrap();
            prop_assert!((scaled - base).abs() <= 1e-12 * base.max(1.0), "{} vs {}", scaled, base);
        }

        #[test]
        fn production_conserves_flow(
            pairs in proptest::collection::vec((0i32..10_000, 0i32..10_000), 2..80),
        ) {
            let (s, i): (Vec<f64>, Vec<f64>) = pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).unzip();
            let y = production_values(&s, &i).unwrap();
            let lhs: f64 = y.iter().sum();
            let rhs: f64 = s[1..].iter().sum::<f64>() + i[i.len() - 1] - i[0];
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn zone_counts_cover_records(zones in proptest::collection::vec((0usize..4, 0usize..3), 1..60)) {
            let records: Vec<AmplificationRecord> = zones
                .iter()
                .enumerate()
                .map(|(k, (z, s))| record(&k.to_string(), Stage::ALL[*s], Zone::ALL[*z]))
                .collect();
            let summary = summarize_zones(&records);
            prop_assert_eq!(summary.total.total, records.len());
            let stage_sum: usize = summary.stages.iter().map(|r| r.total).sum();
            prop_assert_eq!(stage_sum, records.len());
            for row in summary.stages.iter().chain(std::iter::once(&summary.total)) {
                let pct: f64 = row.cells.iter().map(|c| c.percent).sum();
                prop_assert!((pct - 100.0).abs() < 0.1);
            }
            for z in Zone::ALL {
                let tally = zones.iter().filter(|(zi, _)| Zone::ALL[*zi] == z).count();
                prop_assert_eq!(summary.total.count(z), tally);
            }
        }
    }
}
