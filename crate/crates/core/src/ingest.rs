//! Panel and deflator CSV parsing, price deflation, margin adjustment and
//! the train/test split.
//!
//! Panel files have the header `industry_id,stage,kind,period,value`;
//! deflator files have `stage,period,value`. Periods are `YYYY-MM`. Empty
//! values and the Census suppression markers `(S)`, `(D)`, `(NA)` and `NA`
//! count as missing: interior gaps of at most two months are linearly
//! interpolated, anything longer is an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{MonthRange, YearMonth};
use crate::series::{Kind, MonthlySeries, SeriesError, Stage};

pub const PANEL_HEADER: &str = "industry_id,stage,kind,period,value";
pub const DEFLATOR_HEADER: &str = "stage,period,value";

/// Longest run of missing months that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: duplicate period {period} for {industry_id}/{kind}")]
    DuplicatePeriod { line: usize, industry_id: String, kind: String, period: YearMonth },
    #[error("line {line}: unknown stage `{value}`")]
    UnknownStage { line: usize, value: String },
    #[error("line {line}: unknown kind `{value}`")]
    UnknownKind { line: usize, value: String },
    #[error("line {line}: industry {industry_id} listed under stage {found}, earlier rows say {expected}")]
    StageConflict { line: usize, industry_id: String, expected: Stage, found: Stage },
    #[error("{industry_id}/{kind}: {len} consecutive missing months starting {from} (at most {MAX_INTERPOLATED_GAP} are interpolated)")]
    Gap { industry_id: String, kind: String, from: YearMonth, len: usize },
    #[error("{industry_id}/{kind}: missing value at series boundary {period}")]
    BoundaryGap { industry_id: String, kind: String, period: YearMonth },
    #[error("industry {industry_id} has no {kind} series")]
    MissingKind { industry_id: String, kind: Kind },
    #[error("{what}: coverage {found} does not match {expected}")]
    Misaligned { what: String, expected: MonthRange, found: MonthRange },
    #[error("non-positive deflator {value} at {period}")]
    NonPositiveDeflator { period: YearMonth, value: f64 },
    #[error("no deflator for stage {0}")]
    MissingDeflator(Stage),
    #[error("no margin rate for stage {0}")]
    MissingRate(Stage),
    #[error("margin rate {rate} for stage {stage} outside [0, 1)")]
    InvalidRate { stage: Stage, rate: f64 },
    #[error("margin adjustment applies to demand, got {0}")]
    NotDemand(Kind),
    #[error("split month {train_end} must lie strictly inside {coverage}")]
    OutOfRange { train_end: YearMonth, coverage: MonthRange },
    #[error("empty panel")]
    EmptyPanel,
    #[error("{context}: {source}")]
    Series { context: String, source: SeriesError },
}

fn series_err(context: impl Into<String>) -> impl FnOnce(SeriesError) -> IngestError {
    let context = context.into();
    move |source| IngestError::Series { context, source }
}

fn is_missing_marker(v: &str) -> bool {
    matches!(v, "" | "NA" | "(NA)" | "(S)" | "(D)" | "(X)")
}

/// Parses a panel CSV into series grouped by `(industry_id, kind)`, sorted by
/// industry id then kind, each with rows in period order.
pub fn parse_panel_csv(text: &str) -> Result<Vec<MonthlySeries>, IngestError> {
    type Key = (String, Kind);
    let mut rows: BTreeMap<Key, BTreeMap<YearMonth, Option<f64>>> = BTreeMap::new();
    let mut stages: BTreeMap<String, Stage> = BTreeMap::new();

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if normalize_header(h) == PANEL_HEADER => {}
        Some((_, h)) => {
            return Err(IngestError::MalformedRow { line: 1, reason: format!("expected header `{PANEL_HEADER}`, got `{h}`") })
        }
        None => return Err(IngestError::EmptyPanel),
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(IngestError::MalformedRow { line, reason: format!("expected 5 fields, found {}", fields.len()) });
        }
        let industry_id = fields[0];
        if industry_id.is_empty() {
            return Err(IngestError::MalformedRow { line, reason: "empty industry_id".into() });
        }
        let stage: Stage = fields[1]
            .parse()
            .map_err(|value| IngestError::UnknownStage { line, value })?;
        let kind: Kind = fields[2].parse().map_err(|value| IngestError::UnknownKind { line, value })?;
        let period: YearMonth = fields[3]
            .parse()
            .map_err(|e: crate::calendar::ParseYearMonthError| IngestError::MalformedRow { line, reason: e.to_string() })?;
        let value = parse_value(fields[4], line)?;

        match stages.get(industry_id) {
            Some(&expected) if expected != stage => {
                return Err(IngestError::StageConflict { line, industry_id: industry_id.into(), expected, found: stage })
            }
            Some(_) => {}
            None => {
                stages.insert(industry_id.to_string(), stage);
            }
        }
        let entry = rows.entry((industry_id.to_string(), kind)).or_default();
        if entry.insert(period, value).is_some() {
            return Err(IngestError::DuplicatePeriod {
                line,
                industry_id: industry_id.into(),
                kind: kind.to_string(),
                period,
            });
        }
    }

    rows.into_iter()
        .map(|((industry_id, kind), obs)| {
            let stage = stages[&industry_id];
            let label = format!("{industry_id}/{kind}");
            let start = *obs.keys().next().expect("group has at least one row");
            let end = *obs.keys().next_back().expect("group has at least one row");
            let range = MonthRange::new(start, end);
            let raw: Vec<Option<f64>> = (0..range.len())
                .map(|k| obs.get(&start.add_months(k as i64)).copied().flatten())
                .collect();
            let values = fill_gaps(&raw, start, &industry_id, kind)?;
            MonthlySeries::new(industry_id.clone(), stage, kind, start, values).map_err(series_err(label))
        })
        .collect()
}

fn normalize_header(h: &str) -> String {
    h.trim_start_matches('\u{feff}')
        .split(',')
        .map(|f| f.trim().to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_value(v: &str, line: usize) -> Result<Option<f64>, IngestError> {
    if is_missing_marker(v) {
        return Ok(None);
    }
    let value: f64 = v
        .parse()
        .map_err(|_| IngestError::MalformedRow { line, reason: format!("value `{v}` is not a number") })?;
    if !value.is_finite() {
        return Err(IngestError::MalformedRow { line, reason: format!("value `{v}` is not finite") });
    }
    Ok(Some(value))
}

fn fill_gaps(raw: &[Option<f64>], start: YearMonth, industry_id: &str, kind: Kind) -> Result<Vec<f64>, IngestError> {
    let n = raw.len();
    for (k, ym) in [(0usize, start), (n - 1, start.add_months(n as i64 - 1))] {
        if raw[k].is_none() {
            return Err(IngestError::BoundaryGap { industry_id: industry_id.into(), kind: kind.to_string(), period: ym });
        }
    }
    let mut out: Vec<f64> = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        match raw[k] {
            Some(v) => {
                out.push(v);
                k += 1;
            }
            None => {
                let gap_start = k;
                while raw[k].is_none() {
                    k += 1;
                }
                let len = k - gap_start;
                let from = start.add_months(gap_start as i64);
                if len > MAX_INTERPOLATED_GAP {
                    return Err(IngestError::Gap { industry_id: industry_id.into(), kind: kind.to_string(), from, len });
                }
                let left = out[gap_start - 1];
                let right = raw[k].expect("gap ends on an observation");
                log::warn!("{industry_id}/{kind}: interpolating {len} missing month(s) from {from}");
                for j in 1..=len {
                    out.push(left + (right - left) * j as f64 / (len + 1) as f64);
                }
            }
        }
    }
    Ok(out)
}

/// Price index (base 100) for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceIndex {
    pub stage: Stage,
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl PriceIndex {
    pub fn coverage(&self) -> MonthRange {
        MonthRange::new(self.start, self.start.add_months(self.values.len() as i64 - 1))
    }
}

/// Parses `stage,period,value` rows into one index per stage. Gaps are not
/// allowed.
pub fn parse_deflator_csv(text: &str) -> Result<BTreeMap<Stage, PriceIndex>, IngestError> {
    let mut rows: BTreeMap<Stage, BTreeMap<YearMonth, f64>> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if normalize_header(h) == DEFLATOR_HEADER => {}
        Some((_, h)) => {
            return Err(IngestError::MalformedRow {
                line: 1,
                reason: format!("expected header `{DEFLATOR_HEADER}`, got `{h}`"),
            })
        }
        None => return Ok(BTreeMap::new()),
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(IngestError::MalformedRow { line, reason: format!("expected 3 fields, found {}", fields.len()) });
        }
        let stage: Stage = fields[0].parse().map_err(|value| IngestError::UnknownStage { line, value })?;
        let period: YearMonth = fields[1]
            .parse()
            .map_err(|e: crate::calendar::ParseYearMonthError| IngestError::MalformedRow { line, reason: e.to_string() })?;
        let value = parse_value(fields[2], line)?
            .ok_or_else(|| IngestError::MalformedRow { line, reason: "missing deflator value".into() })?;
        if value <= 0.0 {
            return Err(IngestError::NonPositiveDeflator { period, value });
        }
        if rows.entry(stage).or_default().insert(period, value).is_some() {
            return Err(IngestError::DuplicatePeriod { line, industry_id: stage.to_string(), kind: "deflator".into(), period });
        }
    }
    rows.into_iter()
        .map(|(stage, obs)| {
            let start = *obs.keys().next().expect("non-empty");
            let end = *obs.keys().next_back().expect("non-empty");
            let expected = MonthRange::new(start, end);
            if expected.len() != obs.len() {
                let missing = (0..expected.len())
                    .map(|k| start.add_months(k as i64))
                    .find(|ym| !obs.contains_key(ym))
                    .expect("some month missing");
                return Err(IngestError::Gap { industry_id: stage.to_string(), kind: "deflator".into(), from: missing, len: 1 });
            }
            Ok((stage, PriceIndex { stage, start, values: obs.into_values().collect() }))
        })
        .collect()
}

/// Converts nominal dollars to real dollars: `nominal / (deflator / 100)`.
pub fn deflate(nominal: &MonthlySeries, deflator: &PriceIndex) -> Result<MonthlySeries, IngestError> {
    let cov = deflator.coverage();
    let wanted = MonthRange::new(nominal.start(), nominal.end());
    if !(cov.contains(wanted.start) && cov.contains(wanted.end)) {
        return Err(IngestError::Misaligned { what: format!("deflator for stage {}", deflator.stage), expected: wanted, found: cov });
    }
    let offset = deflator.start.months_until(nominal.start()) as usize;
    let values = nominal
        .values()
        .iter()
        .zip(&deflator.values[offset..])
        .enumerate()
        .map(|(k, (&v, &d))| {
            if d <= 0.0 {
                Err(IngestError::NonPositiveDeflator { period: nominal.period(k), value: d })
            } else {
                Ok(v * 100.0 / d)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    nominal
        .with_values(nominal.start(), values)
        .map_err(series_err(format!("deflating {}", nominal.industry_id())))
}

/// Gross margin rate per stage, used to restate sales at cost.
///
/// The defaults (M 0.0, W 0.15, R 0.30) are placeholders for users who have
/// no published margins at hand; they are not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginConfig {
    rates: BTreeMap<Stage, f64>,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self {
            rates: BTreeMap::from([
                (Stage::Manufacturer, 0.0),
                (Stage::Wholesaler, 0.15),
                (Stage::Retailer, 0.30),
            ]),
        }
    }
}

impl MarginConfig {
    pub fn new(rates: impl IntoIterator<Item = (Stage, f64)>) -> Result<Self, IngestError> {
        let rates: BTreeMap<Stage, f64> = rates.into_iter().collect();
        for (&stage, &rate) in &rates {
            if !(0.0..1.0).contains(&rate) {
                return Err(IngestError::InvalidRate { stage, rate });
            }
        }
        Ok(Self { rates })
    }

    /// Margins of zero for every stage.
    pub fn zero() -> Self {
        Self { rates: Stage::ALL.iter().map(|&s| (s, 0.0)).collect() }
    }

    pub fn rate(&self, stage: Stage) -> Option<f64> {
        self.rates.get(&stage).copied()
    }
}

/// Restates sales at cost: `sales * (1 - margin(stage))`.
pub fn margin_adjust(sales: &MonthlySeries, cfg: &MarginConfig) -> Result<MonthlySeries, IngestError> {
    if sales.kind() != Kind::Demand {
        return Err(IngestError::NotDemand(sales.kind()));
    }
    let rate = cfg.rate(sales.stage()).ok_or(IngestError::MissingRate(sales.stage()))?;
    let values = sales.values().iter().map(|v| v * (1.0 - rate)).collect();
    sales
        .with_values(sales.start(), values)
        .map_err(series_err(format!("margin-adjusting {}", sales.industry_id())))
}

/// Demand and inventory of one industry over the panel coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryRecord {
    pub stage: Stage,
    pub demand: MonthlySeries,
    pub inventory: MonthlySeries,
}

impl IndustryRecord {
    pub fn series(&self, kind: Kind) -> Option<&MonthlySeries> {
        match kind {
            Kind::Demand => Some(&self.demand),
            Kind::Inventory => Some(&self.inventory),
            Kind::Production => None,
        }
    }
}

/// Aligned demand/inventory panel keyed by industry id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryPanel {
    industries: BTreeMap<String, IndustryRecord>,
    coverage: MonthRange,
}

impl IndustryPanel {
    /// Groups parsed series into industries. Every industry needs both a
    /// demand and an inventory series and all series must share one
    /// coverage.
    pub fn assemble(series: Vec<MonthlySeries>) -> Result<Self, IngestError> {
        let mut demand: BTreeMap<String, MonthlySeries> = BTreeMap::new();
        let mut inventory: BTreeMap<String, MonthlySeries> = BTreeMap::new();
        for s in series {
            match s.kind() {
                Kind::Demand => demand.insert(s.industry_id().to_string(), s),
                Kind::Inventory => inventory.insert(s.industry_id().to_string(), s),
                Kind::Production => None,
            };
        }
        let mut industries = BTreeMap::new();
        for (id, d) in demand {
            let i = inventory
                .remove(&id)
                .ok_or_else(|| IngestError::MissingKind { industry_id: id.clone(), kind: Kind::Inventory })?;
            industries.insert(id, IndustryRecord { stage: d.stage(), demand: d, inventory: i });
        }
        if let Some(id) = inventory.into_keys().next() {
            return Err(IngestError::MissingKind { industry_id: id, kind: Kind::Demand });
        }
        Self::from_records(industries)
    }

    pub fn from_records(industries: BTreeMap<String, IndustryRecord>) -> Result<Self, IngestError> {
        let first = industries.values().next().ok_or(IngestError::EmptyPanel)?;
        let coverage = MonthRange::new(first.demand.start(), first.demand.end());
        for (id, rec) in &industries {
            for s in [&rec.demand, &rec.inventory] {
                let found = MonthRange::new(s.start(), s.end());
                if found != coverage {
                    return Err(IngestError::Misaligned { what: format!("{id}/{}", s.kind()), expected: coverage, found });
                }
                if s.stage() != rec.stage || s.industry_id() != id {
                    return Err(IngestError::Misaligned { what: format!("{id}/{} metadata", s.kind()), expected: coverage, found });
                }
            }
        }
        Ok(Self { industries, coverage })
    }

    pub fn coverage(&self) -> MonthRange {
        self.coverage
    }

    pub fn len(&self) -> usize {
        self.industries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.industries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndustryRecord> {
        self.industries.get(id)
    }

    /// Industries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &IndustryRecord)> {
        self.industries.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.industries.keys().cloned().collect()
    }

    /// Applies a fallible transform to every series, re-checking alignment.
    pub fn map_series<F>(&self, mut f: F) -> Result<Self, IngestError>
    where
        F: FnMut(&MonthlySeries) -> Result<MonthlySeries, IngestError>,
    {
        let industries = self
            .industries
            .iter()
            .map(|(id, r)| {
                Ok((id.clone(), IndustryRecord { stage: r.stage, demand: f(&r.demand)?, inventory: f(&r.inventory)? }))
            })
            .collect::<Result<BTreeMap<_, _>, IngestError>>()?;
        Self::from_records(industries)
    }

    /// Serializes in the panel CSV schema, industries in id order, demand
    /// before inventory.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(PANEL_HEADER);
        out.push('\n');
        for (id, rec) in &self.industries {
            for s in [&rec.demand, &rec.inventory] {
                write_series_rows(&mut out, id, s);
            }
        }
        out
    }
}

pub(crate) fn write_series_rows(out: &mut String, id: &str, s: &MonthlySeries) {
    for (k, v) in s.values().iter().enumerate() {
        let _ = writeln!(out, "{id},{},{},{},{v}", s.stage().code(), s.kind(), s.period(k));
    }
}

/// Deflates demand and inventory with their stage's price index (when
/// `deflators` is given), then restates demand at cost. Inventory is not
/// margin-adjusted.
pub fn preprocess_panel(
    panel: &IndustryPanel,
    deflators: Option<&BTreeMap<Stage, PriceIndex>>,
    margins: &MarginConfig,
) -> Result<IndustryPanel, IngestError> {
    panel.map_series(|s| {
        let real = match deflators {
            Some(map) => deflate(s, map.get(&s.stage()).ok_or(IngestError::MissingDeflator(s.stage()))?)?,
            None => s.clone(),
        };
        match s.kind() {
            Kind::Demand => margin_adjust(&real, margins),
            _ => Ok(real),
        }
    })
}

/// Splits at `train_end` (inclusive in the training part).
pub fn split_panel(p: &IndustryPanel, train_end: YearMonth) -> Result<(IndustryPanel, IndustryPanel), IngestError> {
    let cov = p.coverage();
    if !(cov.start <= train_end && train_end < cov.end) {
        return Err(IngestError::OutOfRange { train_end, coverage: cov });
    }
    let train_len = cov.start.months_until(train_end) as usize + 1;
    let test_len = cov.len() - train_len;
    let cut = |s: &MonthlySeries, from: usize, len: usize| {
        s.slice(from, len).map_err(series_err(format!("splitting {}", s.industry_id())))
    };
    let train = p.map_series(|s| cut(s, 0, train_len))?;
    let test = p.map_series(|s| cut(s, train_len, test_len))?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn demand(values: Vec<f64>, stage: Stage) -> MonthlySeries {
        MonthlySeries::new("X", stage, Kind::Demand, ym("2000-01"), values).unwrap()
    }

    fn panel_text(industries: &[(&str, &str)], start: YearMonth, n: usize) -> String {
        let mut text = String::from(PANEL_HEADER);
        text.push('\n');
        for (id, stage) in industries {
            for kind in ["demand", "inventory"] {
                for k in 0..n {
                    let v = 100.0 + k as f64;
                    text.push_str(&format!("{id},{stage},{kind},{},{v}\n", start.add_months(k as i64)));
                }
            }
        }
        text
    }

    #[test]
    fn parse_two_rows() {
        let text = "industry_id,stage,kind,period,value\nX,M,demand,1992-02,12\nX,M,demand,1992-01,10\n";
        let s = parse_panel_csv(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].values(), &[10.0, 12.0]);
        assert_eq!(s[0].start(), ym("1992-01"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_month = "industry_id,stage,kind,period,value\nX,M,demand,1992-13,10\n";
        assert!(matches!(parse_panel_csv(bad_month), Err(IngestError::MalformedRow { line: 2, .. })));
        let dup = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,10\nX,M,demand,1992-01,11\n";
        assert!(matches!(parse_panel_csv(dup), Err(IngestError::DuplicatePeriod { line: 3, .. })));
        let stage = "industry_id,stage,kind,period,value\nX,Q,demand,1992-01,10\n";
        assert!(matches!(parse_panel_csv(stage), Err(IngestError::UnknownStage { line: 2, .. })));
        let kind = "industry_id,stage,kind,period,value\nX,M,orders,1992-01,10\n";
        assert!(matches!(parse_panel_csv(kind), Err(IngestError::UnknownKind { line: 2, .. })));
        let value = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,ten\n";
        assert!(matches!(parse_panel_csv(value), Err(IngestError::MalformedRow { line: 2, .. })));
        let fields = "industry_id,stage,kind,period,value\nX,M,demand,1992-01\n";
        assert!(matches!(parse_panel_csv(fields), Err(IngestError::MalformedRow { line: 2, .. })));
        assert!(matches!(parse_panel_csv("a,b\n"), Err(IngestError::MalformedRow { line: 1, .. })));
    }

    #[test]
    fn parse_fixture_panel() {
        let text = panel_text(&[("A", "M"), ("B", "W"), ("C", "R")], ym("1992-01"), 384);
        let series = parse_panel_csv(&text).unwrap();
        assert_eq!(series.len(), 6);
        assert!(series.iter().all(|s| s.len() == 384));
        let panel = IndustryPanel::assemble(series).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(panel.coverage().len(), 384);
        assert_eq!(panel.get("B").unwrap().stage, Stage::Wholesaler);
    }

    #[test]
    fn short_gaps_interpolated_long_gaps_rejected() {
        let text = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,10\nX,M,demand,1992-02,(S)\nX,M,demand,1992-04,16\n";
        let s = parse_panel_csv(text).unwrap();
        assert_eq!(s[0].values(), &[10.0, 12.0, 14.0, 16.0]);
        let text = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,10\nX,M,demand,1992-05,16\n";
        assert!(matches!(parse_panel_csv(text), Err(IngestError::Gap { len: 3, .. })));
        let text = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,\nX,M,demand,1992-02,16\nX,M,demand,1992-03,16\n";
        assert!(matches!(parse_panel_csv(text), Err(IngestError::BoundaryGap { .. })));
    }

    #[test]
    fn assemble_rejects_misaligned_and_missing() {
        let mut text = panel_text(&[("A", "M")], ym("1992-01"), 24);
        text.push_str("A,M,demand,1994-01,5\n");
        assert!(matches!(
            IndustryPanel::assemble(parse_panel_csv(&text).unwrap()),
            Err(IngestError::Misaligned { .. })
        ));
        let text = "industry_id,stage,kind,period,value\nX,M,demand,1992-01,10\nX,M,demand,1992-02,10\n";
        assert!(matches!(
            IndustryPanel::assemble(parse_panel_csv(text).unwrap()),
            Err(IngestError::MissingKind { .. })
        ));
    }

    #[test]
    fn deflate_examples() {
        let index = |values: Vec<f64>| PriceIndex { stage: Stage::Manufacturer, start: ym("2000-01"), values };
        let out = deflate(&demand(vec![220.0, 220.0], Stage::Manufacturer), &index(vec![110.0, 110.0])).unwrap();
        assert_eq!(out.values(), &[200.0, 200.0]);
        let s = demand(vec![3.0, 7.5], Stage::Manufacturer);
        assert_eq!(deflate(&s, &index(vec![100.0, 100.0])).unwrap().values(), s.values());
        let out = deflate(&demand(vec![100.0, 102.0, 105.0], Stage::Manufacturer), &index(vec![100.0, 101.0, 102.0])).unwrap();
        let expected = [100.0, 100.99009900990099, 102.94117647058823];
        for (a, b) in out.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(matches!(
            deflate(&demand(vec![1.0, 2.0, 3.0], Stage::Manufacturer), &index(vec![100.0, 100.0])),
            Err(IngestError::Misaligned { .. })
        ));
        assert!(matches!(
            deflate(&demand(vec![1.0, 2.0], Stage::Manufacturer), &index(vec![100.0, 0.0])),
            Err(IngestError::NonPositiveDeflator { .. })
        ));
    }

    #[test]
    fn deflate_uses_overlapping_slice() {
        let index = PriceIndex { stage: Stage::Retailer, start: ym("1999-11"), values: vec![50.0, 50.0, 200.0, 400.0, 1.0] };
        let out = deflate(&demand(vec![10.0, 20.0], Stage::Retailer), &index).unwrap();
        assert_eq!(out.values(), &[5.0, 5.0]);
    }

    #[test]
    fn margin_examples() {
        let zero = MarginConfig::zero();
        let s = demand(vec![100.0, 200.0], Stage::Retailer);
        assert_eq!(margin_adjust(&s, &zero).unwrap().values(), s.values());
        let cfg = MarginConfig::new([(Stage::Retailer, 0.30)]).unwrap();
        assert!((margin_adjust(&s, &cfg).unwrap().values()[0] - 70.0).abs() < 1e-12);
        let cfg = MarginConfig::new([(Stage::Retailer, 0.15)]).unwrap();
        let out = margin_adjust(&s, &cfg).unwrap();
        assert!((out.values()[0] - 85.0).abs() < 1e-12 && (out.values()[1] - 170.0).abs() < 1e-12);
        let w = demand(vec![1.0, 2.0], Stage::Wholesaler);
        assert!(matches!(margin_adjust(&w, &cfg), Err(IngestError::MissingRate(Stage::Wholesaler))));
        assert!(MarginConfig::new([(Stage::Retailer, 1.0)]).is_err());
    }

    #[test]
    fn split_examples() {
        let panel = IndustryPanel::assemble(
            parse_panel_csv(&panel_text(&[("A", "M")], ym("1992-01"), 384)).unwrap(),
        )
        .unwrap();
        let (train, test) = split_panel(&panel, ym("2015-12")).unwrap();
        assert_eq!(train.coverage().len(), 288);
        assert_eq!(test.coverage().len(), 96);
        assert_eq!(test.coverage().start, ym("2016-01"));
        assert!(matches!(split_panel(&panel, ym("2023-12")), Err(IngestError::OutOfRange { .. })));
        assert!(matches!(split_panel(&panel, ym("1991-12")), Err(IngestError::OutOfRange { .. })));

        let toy = IndustryPanel::assemble(parse_panel_csv(&panel_text(&[("A", "M")], ym("2000-01"), 24)).unwrap()).unwrap();
        let (a, b) = split_panel(&toy, ym("2000-12")).unwrap();
        assert_eq!((a.coverage().len(), b.coverage().len()), (12, 12));
    }

    #[test]
    fn csv_round_trip() {
        let text = panel_text(&[("A", "M"), ("B", "R")], ym("2001-05"), 30);
        let panel = IndustryPanel::assemble(parse_panel_csv(&text).unwrap()).unwrap();
        let again = IndustryPanel::assemble(parse_panel_csv(&panel.to_csv()).unwrap()).unwrap();
        assert_eq!(panel, again);
    }

    #[test]
    fn deflator_parsing() {
        let text = "stage,period,value\nM,2000-01,100\nM,2000-02,101\nR,2000-01,99\n";
        let map = parse_deflator_csv(text).unwrap();
        assert_eq!(map[&Stage::Manufacturer].values, vec![100.0, 101.0]);
        let gap = "stage,period,value\nM,2000-01,100\nM,2000-03,101\n";
        assert!(parse_deflator_csv(gap).is_err());
        let neg = "stage,period,value\nM,2000-01,-1\n";
        assert!(matches!(parse_deflator_csv(neg), Err(IngestError::NonPositiveDeflator { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn deflate_then_reinflate(values in prop::collection::vec(0.0f64..1e7, 2..40), seed in 50.0f64..200.0) {
                let n = values.len();
                let idx: Vec<f64> = (0..n).map(|k| seed + k as f64 * 0.37).collect();
                let index = PriceIndex { stage: Stage::Manufacturer, start: ym("2000-01"), values: idx.clone() };
                let real = deflate(&demand(values.clone(), Stage::Manufacturer), &index).unwrap();
                for ((r, d), v) in real.values().iter().zip(&idx).zip(&values) {
                    prop_assert!((r * d / 100.0 - v).abs() <= 1e-9 * v.abs().max(1.0));
                }
            }

            #[test]
            fn parse_is_total(lines in prop::collection::vec("[A-Z,0-9.\\-]{0,30}", 0..8)) {
                let mut text = String::from(PANEL_HEADER);
                for l in &lines { text.push('\n'); text.push_str(l); }
                // either a result or a located error, never a panic
                let _ = parse_panel_csv(&text);
            }
        }
    }
}
