//! Forecast accuracy: MAPE per industry, aggregated across industries into a
//! table keyed by (kind, model, sub-period), and best-model selection on the
//! baseline sub-period.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{MonthRange, YearMonth};
use crate::ingest::IndustryPanel;
use crate::series::{mean, Kind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("actual value at position {0} is zero")]
    ZeroActual(usize),
    #[error("length mismatch: {actual} actual values, {forecast} forecasts")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("no values to score")]
    Empty,
    #[error("{model} has no forecast for {industry_id}/{kind} covering {period}")]
    MissingForecast { model: ModelId, industry_id: String, kind: Kind, period: MonthRange },
    #[error("actual {industry_id}/{kind} does not cover {period}")]
    MissingActual { industry_id: String, kind: Kind, period: MonthRange },
    #[error("{industry_id}/{kind}: {source}")]
    Score { industry_id: String, kind: Kind, source: Box<EvaluationError> },
}

/// Forecasting model families, in canonical (tie-break) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "SARIMA")]
    Sarima,
    #[serde(rename = "TrendSeasonal")]
    TrendSeasonal,
    #[serde(rename = "RNN")]
    Rnn,
    #[serde(rename = "LSTM")]
    Lstm,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Sarima, ModelId::TrendSeasonal, ModelId::Rnn, ModelId::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Sarima => "SARIMA",
            ModelId::TrendSeasonal => "TrendSeasonal",
            ModelId::Rnn => "RNN",
            ModelId::Lstm => "LSTM",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sarima" => Ok(ModelId::Sarima),
            "trendseasonal" | "trend_seasonal" | "trend-seasonal" | "prophet" => Ok(ModelId::TrendSeasonal),
            "rnn" => Ok(ModelId::Rnn),
            "lstm" => Ok(ModelId::Lstm),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

/// Forecast values for consecutive months from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPath {
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl ForecastPath {
    pub fn range(&self) -> MonthRange {
        MonthRange::new(self.start, self.start.add_months(self.values.len() as i64 - 1))
    }

    pub fn get(&self, ym: YearMonth) -> Option<f64> {
        let k = self.start.months_until(ym);
        usize::try_from(k).ok().and_then(|k| self.values.get(k).copied())
    }
}

/// Forecasts of one model, keyed by industry and kind.
pub type ForecastSet = BTreeMap<(String, Kind), ForecastPath>;

/// The two scoring windows: a pre-shock baseline and the shock period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Baseline,
    Shock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPeriods {
    pub baseline: MonthRange,
    pub shock: MonthRange,
}

impl Default for SubPeriods {
    fn default() -> Self {
        let ym = |y, m| YearMonth::new(y, m).expect("valid month");
        Self {
            baseline: MonthRange::new(ym(2016, 1), ym(2019, 12)),
            shock: MonthRange::new(ym(2020, 1), ym(2023, 12)),
        }
    }
}

impl SubPeriods {
    /// Splits `test` so the shock window starts at `shock_start`.
    pub fn split(test: MonthRange, shock_start: YearMonth) -> Self {
        Self {
            baseline: MonthRange::new(test.start, shock_start.add_months(-1)),
            shock: MonthRange::new(shock_start, test.end),
        }
    }

    pub fn range(&self, p: Period) -> MonthRange {
        match p {
            Period::Baseline => self.baseline,
            Period::Shock => self.shock,
        }
    }

    /// `"2016-2019"` style label.
    pub fn label(&self, p: Period) -> String {
        let r = self.range(p);
        format!("{}-{}", r.start.year(), r.end.year())
    }
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, EvaluationError> {
    if actual.len() != forecast.len() {
        return Err(EvaluationError::LengthMismatch { actual: actual.len(), forecast: forecast.len() });
    }
    if actual.is_empty() {
        return Err(EvaluationError::Empty);
    }
    let mut total = 0.0;
    for (k, (a, f)) in actual.iter().zip(forecast).enumerate() {
        if *a == 0.0 {
            return Err(EvaluationError::ZeroActual(k));
        }
        total += ((a - f) / a).abs();
    }
    Ok(100.0 * total / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryScore {
    pub industry_id: String,
    pub kind: Kind,
    pub model: ModelId,
    pub period: Period,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub kind: Kind,
    pub model: ModelId,
    pub period: Period,
    pub label: String,
    pub mape_mean: f64,
    /// Sample variance across industries; 0 with a single industry.
    pub mape_variance: f64,
    pub industries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub periods: SubPeriods,
    /// Ordered by kind, model, period.
    pub rows: Vec<BenchmarkRow>,
    pub scores: Vec<IndustryScore>,
}

pub const BENCHMARK_HEADER: &str = "kind,model,period,mape_mean,mape_variance,industries";

impl BenchmarkTable {
    pub fn row(&self, kind: Kind, model: ModelId, period: Period) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.kind == kind && r.model == model && r.period == period)
    }

    pub fn models(&self) -> Vec<ModelId> {
        let mut m: Vec<ModelId> = self.rows.iter().map(|r| r.model).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCHMARK_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.kind, r.model, r.label, r.mape_mean, r.mape_variance, r.industries
            ));
        }
        out
    }
}

/// Mean and sample variance of `x` (variance 0 for a single value).
fn mean_and_variance(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    (m, var)
}

/// Scores every model on every industry's demand and inventory over both
/// sub-periods and aggregates across industries.
pub fn benchmark(
    actual: &IndustryPanel,
    forecasts: &BTreeMap<ModelId, ForecastSet>,
    periods: SubPeriods,
) -> Result<BenchmarkTable, EvaluationError> {
    let mut scores = Vec::new();
    let mut rows = Vec::new();
    for kind in [Kind::Demand, Kind::Inventory] {
        for (&model, set) in forecasts {
            for period in [Period::Baseline, Period::Shock] {
                let range = periods.range(period);
                let mut cell = Vec::with_capacity(actual.len());
                for (id, record) in actual.iter() {
                    let series = record.series(kind).expect("demand and inventory are always present");
                    let months: Vec<YearMonth> = (0..range.len()).map(|k| range.start.add_months(k as i64)).collect();
                    let missing_actual = || EvaluationError::MissingActual { industry_id: id.clone(), kind, period: range };
                    let a: Vec<f64> = months
                        .iter()
                        .map(|&ym| series.index_of(ym).map(|i| series.values()[i]))
                        .collect::<Option<_>>()
                        .ok_or_else(missing_actual)?;
                    let path = set.get(&(id.clone(), kind));
                    let f: Vec<f64> = months
                        .iter()
                        .map(|&ym| path.and_then(|p| p.get(ym)))
                        .collect::<Option<_>>()
                        .ok_or_else(|| EvaluationError::MissingForecast {
                            model,
                            industry_id: id.clone(),
                            kind,
                            period: range,
                        })?;
                    let score = mape(&a, &f).map_err(|e| EvaluationError::Score {
                        industry_id: id.clone(),
                        kind,
                        source: Box::new(e),
                    })?;
                    cell.push(score);
                    scores.push(IndustryScore { industry_id: id.clone(), kind, model, period, mape: score });
                }
                let (mape_mean, mape_variance) = mean_and_variance(&cell);
                rows.push(BenchmarkRow {
                    kind,
                    model,
                    period,
                    label: periods.label(period),
                    mape_mean,
                    mape_variance,
                    industries: cell.len(),
                });
            }
        }
    }
    Ok(BenchmarkTable { periods, rows, scores })
}

/// Model with the lowest baseline MAPE averaged over kinds; ties go to the
/// lower averaged baseline variance, then to canonical order.
pub fn select_best(table: &BenchmarkTable) -> Option<ModelId> {
    let baseline = |model: ModelId| {
        let cells: Vec<&BenchmarkRow> =
            table.rows.iter().filter(|r| r.model == model && r.period == Period::Baseline).collect();
        let n = cells.len() as f64;
        let m = cells.iter().map(|r| r.mape_mean).sum::<f64>() / n;
        let v = cells.iter().map(|r| r.mape_variance).sum::<f64>() / n;
        (m, v)
    };
    table
        .models()
        .into_iter()
        .map(|model| (model, baseline(model)))
        .min_by(|(ma, (a_mean, a_var)), (mb, (b_mean, b_var))| {
            a_mean.total_cmp(b_mean).then(a_var.total_cmp(b_var)).then(ma.cmp(mb))
        })
        .map(|(model, _)| model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::IndustryRecord;
    use crate::series::{MonthlySeries, Stage};
    use proptest::prelude::*;

    fn ym(y: i32, m: u8) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    fn panel(ids: &[&str], start: YearMonth, n: usize) -> IndustryPanel {
        let mut map = BTreeMap::new();
        for (k, id) in ids.iter().enumerate() {
            let values: Vec<f64> = (0..n).map(|t| 100.0 + (k * 10 + t) as f64).collect();
            let d = MonthlySeries::new(*id, Stage::Manufacturer, Kind::Demand, start, values.clone()).unwrap();
            let i = MonthlySeries::new(*id, Stage::Manufacturer, Kind::Inventory, start, values).unwrap();
            map.insert(id.to_string(), IndustryRecord { stage: Stage::Manufacturer, demand: d, inventory: i });
        }
        IndustryPanel::from_records(map).unwrap()
    }

    fn perfect(p: &IndustryPanel) -> ForecastSet {
        let mut set = ForecastSet::new();
        for (id, rec) in p.iter() {
            for kind in [Kind::Demand, Kind::Inventory] {
                let s = rec.series(kind).unwrap();
                set.insert((id.clone(), kind), ForecastPath { start: s.start(), values: s.values().to_vec() });
            }
        }
        set
    }

    fn row(kind: Kind, model: ModelId, period: Period, mean: f64, var: f64) -> BenchmarkRow {
        BenchmarkRow { kind, model, period, label: String::new(), mape_mean: mean, mape_variance: var, industries: 3 }
    }

    fn table(rows: Vec<BenchmarkRow>) -> BenchmarkTable {
        BenchmarkTable { periods: SubPeriods::default(), rows, scores: Vec::new() }
    }

    fn full_table(means: [f64; 4]) -> BenchmarkTable {
        let mut rows = Vec::new();
        for kind in [Kind::Demand, Kind::Inventory] {
            for (m, mean) in ModelId::ALL.iter().zip(means) {
                rows.push(row(kind, *m, Period::Baseline, mean, 1.0));
                rows.push(row(kind, *m, Period::Shock, 50.0, 1.0));
            }
        }
        table(rows)
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((mape(&[100.0, 200.0], &[90.0, 220.0]).unwrap() - 10.0).abs() < 1e-12);
        // Each point is off by exactly 10%.
        assert!((mape(&[50.0, 80.0, 120.0], &[55.0, 72.0, 132.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[1.0, 0.0], &[1.0, 1.0]), Err(EvaluationError::ZeroActual(1)));
        assert!(matches!(mape(&[1.0], &[1.0, 2.0]), Err(EvaluationError::LengthMismatch { .. })));
        assert_eq!(mape(&[], &[]), Err(EvaluationError::Empty));
        assert!((mape(&[-50.0], &[-55.0]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn model_names() {
        assert_eq!("prophet".parse::<ModelId>(), Ok(ModelId::TrendSeasonal));
        assert_eq!("LSTM".parse::<ModelId>(), Ok(ModelId::Lstm));
        assert_eq!(serde_json::to_string(&ModelId::Sarima).unwrap(), "\"SARIMA\"");
        assert!(ModelId::Sarima < ModelId::TrendSeasonal && ModelId::Rnn < ModelId::Lstm);
    }

    #[test]
    fn perfect_forecasts_score_zero() {
        let p = panel(&["311"], ym(2016, 1), 96);
        let forecasts: BTreeMap<ModelId, ForecastSet> = ModelId::ALL.iter().map(|m| (*m, perfect(&p))).collect();
        let t = benchmark(&p, &forecasts, SubPeriods::default()).unwrap();
        assert_eq!(t.rows.len(), 16);
        assert!(t.rows.iter().all(|r| r.mape_mean == 0.0 && r.mape_variance == 0.0 && r.industries == 1));
        assert_eq!(t.rows[0].label, "2016-2019");
        assert_eq!(t.rows[1].label, "2020-2023");
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with(BENCHMARK_HEADER));
    }

    #[test]
    fn two_industries_mean_and_variance() {
        let p = panel(&["a", "b"], ym(2016, 1), 96);
        let mut set = perfect(&p);
        // 4% and 6% errors on demand.
        for (id, pct) in [("a", 0.04), ("b", 0.06)] {
            let path = set.get_mut(&(id.to_string(), Kind::Demand)).unwrap();
            path.values.iter_mut().for_each(|v| *v *= 1.0 + pct);
        }
        let t = benchmark(&p, &BTreeMap::from([(ModelId::Lstm, set)]), SubPeriods::default()).unwrap();
        let r = t.row(Kind::Demand, ModelId::Lstm, Period::Baseline).unwrap();
        assert!((r.mape_mean - 5.0).abs() < 1e-12 && (r.mape_variance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_forecast_is_named() {
        let p = panel(&["a", "b"], ym(2016, 1), 96);
        let mut set = perfect(&p);
        set.remove(&("b".to_string(), Kind::Inventory));
        let err = benchmark(&p, &BTreeMap::from([(ModelId::Rnn, set)]), SubPeriods::default()).unwrap_err();
        assert!(matches!(err, EvaluationError::MissingForecast { ref industry_id, kind: Kind::Inventory, .. } if industry_id == "b"));
        let mut short = perfect(&p);
        short.get_mut(&("a".to_string(), Kind::Demand)).unwrap().values.truncate(60);
        assert!(benchmark(&p, &BTreeMap::from([(ModelId::Rnn, short)]), SubPeriods::default()).is_err());
    }

    #[test]
    fn selection() {
        assert_eq!(select_best(&full_table([5.0, 4.0, 3.0, 2.0])), Some(ModelId::Lstm));
        assert_eq!(select_best(&full_table([3.0, 3.0, 3.0, 3.0])), Some(ModelId::Sarima));
        let only = table(vec![row(Kind::Demand, ModelId::Rnn, Period::Baseline, 9.0, 1.0)]);
        assert_eq!(select_best(&only), Some(ModelId::Rnn));
        assert_eq!(select_best(&table(Vec::new())), None);
        // Equal means: lower variance wins.
        let mut t = full_table([3.0, 3.0, 3.0, 3.0]);
        t.rows.iter_mut().filter(|r| r.model != ModelId::Rnn).for_each(|r| r.mape_variance = 2.0);
        assert_eq!(select_best(&t), Some(ModelId::Rnn));
    }

    #[test]
    fn split_periods() {
        let p = SubPeriods::split(MonthRange::new(ym(2016, 1), ym(2023, 12)), ym(2020, 1));
        assert_eq!(p, SubPeriods::default());
        assert_eq!(p.baseline.len(), 48);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn mape_is_scale_invariant(
            pairs in proptest::collection::vec((1.0f64..1e4, 0.0f64..2e4), 1..40),
            c in 1e-3f64..1e3,
        ) {
            let (a, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = mape(&a, &f).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
            let sf: Vec<f64> = f.iter().map(|v| v * c).collect();
            prop_assert!((mape(&sa, &sf).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn aggregation_matches_brute_force(errs in proptest::collection::vec(0.0f64..0.5, 3..8)) {
            let ids: Vec<String> = (0..errs.len()).map(|k| format!("i{k}")).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let p = panel(&refs, ym(2016, 1), 96);
            let mut set = perfect(&p);
            for (id, e) in ids.iter().zip(&errs) {
                let path = set.get_mut(&(id.clone(), Kind::Inventory)).unwrap();
                for (t, v) in path.values.iter_mut().enumerate() {
                    *v *= 1.0 + if t % 2 == 0 { *e } else { -*e / 2.0 };
                }
            }
            let t = benchmark(&p, &BTreeMap::from([(ModelId::Sarima, set)]), SubPeriods::default()).unwrap();
            for period in [Period::Baseline, Period::Shock] {
                let per: Vec<f64> = t.scores.iter()
                    .filter(|s| s.kind == Kind::Inventory && s.period == period)
                    .map(|s| s.mape)
                    .collect();
                let n = per.len() as f64;
                let m = per.iter().sum::<f64>() / n;
                let v = per.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
                let r = t.row(Kind::Inventory, ModelId::Sarima, period).unwrap();
                prop_assert!((r.mape_mean - m).abs() <= 1e-12 && (r.mape_variance - v).abs() <= 1e-12);
            }
        }

        #[test]
        fn shock_cells_never_change_selection(
            base in proptest::array::uniform4(0.0f64..20.0),
            shock in proptest::collection::vec(0.0f64..100.0, 8),
        ) {
            let t = full_table(base);
            let chosen = select_best(&t);
            let mut perturbed = t.clone();
            for (r, s) in perturbed.rows.iter_mut().filter(|r| r.period == Period::Shock).zip(&shock) {
                r.mape_mean = *s;
                r.mape_variance = *s / 2.0;
            }
            prop_assert_eq!(select_best(&perturbed), chosen);
        }
    }
}
