//! End-to-end run driven by a manifest: ingest, stationarity, per-model
//! forecasts, benchmark, best-model selection, bullwhip ratios and zones.
//!
//! Each stage is a function of the previous stages' results so that callers
//! can stop early. Work fans out over industries on a bounded thread pool;
//! results are gathered in a fixed order, so outputs do not depend on the
//! number of workers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bullwhip::{
    amplification_ratio, infer_production, parse_annotations, production_values, ratios_csv, summarize_zones,
    AmplificationRecord, Annotation, BullwhipError, RecordStatus, ZoneSummary,
};
use crate::calendar::{MonthRange, YearMonth};
use crate::evaluation::{benchmark, select_best, BenchmarkTable, EvaluationError, ForecastPath, ForecastSet, ModelId, SubPeriods};
use crate::ingest::{parse_deflator_csv, parse_panel_csv, preprocess_panel, split_panel, IndustryPanel, IngestError, MarginConfig};
use crate::neural::{fit, make_windows, predict, HorizonMode, LstmModel, Recurrent, RnnModel, TrainConfig};
use crate::sarima::{forecast_sarima, select_sarima, SarimaGrid};
use crate::series::{decompose_values, Kind, MinMaxRecipe, Stage};
use crate::stationarity::{adf_test, AdfConfig, AdfResult};
use crate::trend_seasonal::{fit_trend_seasonal, forecast_trend_seasonal, TrendSeasonalConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Names of the files written by [`write_outputs`].
pub const OUTPUT_FILES: [&str; 9] = [
    "adf.csv",
    "forecasts.csv",
    "benchmark.csv",
    "benchmark.json",
    "ratios.csv",
    "scatter.csv",
    "zones.json",
    "report.json",
    "manifest.json",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{key}: {reason}")]
    Config { key: String, reason: String },
    #[error("{context}: {source}")]
    Ingest { context: String, source: IngestError },
    #[error("{industry_id}/{kind}: {source}")]
    Adf { industry_id: String, kind: Kind, source: crate::stationarity::AdfError },
    #[error("{model} on {industry_id}/{kind}: {reason}")]
    Forecast { model: ModelId, industry_id: String, kind: Kind, reason: String },
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{}: {source}", path.display())]
    Annotations { path: PathBuf, source: BullwhipError },
    #[error("no model produced a complete benchmark")]
    NoModel,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("serializing {what}: {reason}")]
    Serialize { what: &'static str, reason: String },
}

impl PipelineError {
    /// Pipeline stage the error belongs to.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config { .. } => "config",
            Self::Io { .. } | Self::Ingest { .. } | Self::Annotations { .. } => "ingest",
            Self::Adf { .. } => "adf",
            Self::Forecast { .. } => "forecast",
            Self::Evaluation(_) | Self::NoModel => "benchmark",
            Self::Pool(_) => "pool",
            Self::Serialize { .. } => "report",
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Config { key: key.into(), reason: reason.into() }
}

/// Manifest file contents (TOML). Every key is optional here; resolution
/// fills defaults and rejects a missing `panel`. Command-line flags are
/// expressed as a second `Manifest` layered on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub panel: Option<PathBuf>,
    pub deflators: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// Gross margin rate per stage code (`M`, `W`, `R`).
    pub margins: Option<BTreeMap<String, f64>>,
    pub train_end: Option<YearMonth>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub models: Option<Vec<String>>,
    pub horizon_mode: Option<String>,
    pub jobs: Option<usize>,
    pub window: Option<usize>,
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    /// First month of the shock sub-period.
    pub shock_start: Option<YearMonth>,
    pub bullwhip_start: Option<YearMonth>,
    pub bullwhip_end: Option<YearMonth>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| config_err("manifest", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml(&read_text(path)?).map_err(|e| match e {
            PipelineError::Config { reason, .. } => config_err(&path.display().to_string(), reason),
            other => other,
        })
    }

    /// Keys set in `top` win over keys set in `self`.
    pub fn overlay(self, top: Manifest) -> Manifest {
        Manifest {
            panel: top.panel.or(self.panel),
            deflators: top.deflators.or(self.deflators),
            annotations: top.annotations.or(self.annotations),
            margins: match (self.margins, top.margins) {
                (Some(mut base), Some(top)) => {
                    base.extend(top);
                    Some(base)
                }
                (base, top) => top.or(base),
            },
            train_end: top.train_end.or(self.train_end),
            out_dir: top.out_dir.or(self.out_dir),
            seed: top.seed.or(self.seed),
            models: top.models.or(self.models),
            horizon_mode: top.horizon_mode.or(self.horizon_mode),
            jobs: top.jobs.or(self.jobs),
            window: top.window.or(self.window),
            hidden: top.hidden.or(self.hidden),
            epochs: top.epochs.or(self.epochs),
            learning_rate: top.learning_rate.or(self.learning_rate),
            shock_start: top.shock_start.or(self.shock_start),
            bullwhip_start: top.bullwhip_start.or(self.bullwhip_start),
            bullwhip_end: top.bullwhip_end.or(self.bullwhip_end),
        }
    }
}

fn ym(y: i32, m: u8) -> YearMonth {
    YearMonth::new(y, m).expect("valid month")
}

/// Fully resolved options. `jobs` and `out_dir` affect where and how fast a
/// run happens, not what it computes, so reports leave them out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub deflators: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub margins: MarginConfig,
    pub train_end: YearMonth,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub seed: u64,
    pub models: Vec<ModelId>,
    pub horizon_mode: HorizonMode,
    #[serde(skip)]
    pub jobs: usize,
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub shock_start: YearMonth,
    pub bullwhip_window: MonthRange,
}

impl RunConfig {
    /// Applies defaults. Relative paths are taken relative to `base_dir`.
    pub fn resolve(m: Manifest, base_dir: &Path) -> Result<Self, PipelineError> {
        let path = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let panel = m.panel.map(path).ok_or_else(|| config_err("panel", "required key is missing"))?;

        let mut margins = MarginConfig::default();
        if let Some(rates) = m.margins {
            let mut merged: BTreeMap<Stage, f64> = Stage::ALL.iter().filter_map(|&s| margins.rate(s).map(|r| (s, r))).collect();
            for (code, rate) in rates {
                let stage: Stage = code.parse().map_err(|_| config_err(&format!("margins.{code}"), "unknown stage (expected M, W or R)"))?;
                merged.insert(stage, rate);
            }
            margins = MarginConfig::new(merged).map_err(|e| config_err("margins", e.to_string()))?;
        }

        let models = match m.models {
            None => ModelId::ALL.to_vec(),
            Some(names) => {
                let mut ids = names
                    .iter()
                    .map(|n| n.parse::<ModelId>().map_err(|e| config_err("models", e)))
                    .collect::<Result<Vec<_>, _>>()?;
                ids.sort();
                ids.dedup();
                if ids.is_empty() {
                    return Err(config_err("models", "at least one model is required"));
                }
                ids
            }
        };
        let horizon_mode = match m.horizon_mode {
            None => HorizonMode::default(),
            Some(s) => s.parse().map_err(|e: String| config_err("horizon_mode", e))?,
        };
        let positive = |key: &str, v: Option<usize>, default: usize| match v {
            Some(0) => Err(config_err(key, "must be at least 1")),
            Some(v) => Ok(v),
            None => Ok(default),
        };
        let learning_rate = m.learning_rate.unwrap_or(1e-3);
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(config_err("learning_rate", "must be positive"));
        }
        let bullwhip_window = MonthRange::new(m.bullwhip_start.unwrap_or(ym(2020, 1)), m.bullwhip_end.unwrap_or(ym(2023, 12)));
        if bullwhip_window.start.months_until(bullwhip_window.end) < 2 {
            return Err(config_err("bullwhip_end", "window must span at least 3 months"));
        }
        Ok(Self {
            panel,
            deflators: m.deflators.map(path),
            annotations: m.annotations.map(path),
            margins,
            train_end: m.train_end.unwrap_or(ym(2015, 12)),
            out_dir: path(m.out_dir.unwrap_or_else(|| PathBuf::from("bwe-out"))),
            seed: m.seed.unwrap_or(0),
            models,
            horizon_mode,
            jobs: positive("jobs", m.jobs, std::thread::available_parallelism().map_or(1, |n| n.get()))?,
            window: positive("window", m.window, 12)?,
            hidden: positive("hidden", m.hidden, 32)?,
            epochs: positive("epochs", m.epochs, 200)?,
            learning_rate,
            shock_start: m.shock_start.unwrap_or(ym(2020, 1)),
            bullwhip_window,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))
    }
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parsed and preprocessed inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    /// Deflated, margin-adjusted panel over the full coverage.
    pub panel: IndustryPanel,
    pub train: IndustryPanel,
    pub test: IndustryPanel,
    pub periods: SubPeriods,
    pub annotations: BTreeMap<String, Annotation>,
    /// SHA-256 of every input file, keyed by path.
    pub digests: BTreeMap<String, String>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, PipelineError> {
    let mut digests = BTreeMap::new();
    let mut read = |path: &Path| -> Result<String, PipelineError> {
        let text = read_text(path)?;
        digests.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(text)
    };
    let ingest_err = |path: &Path| {
        let context = path.display().to_string();
        move |source| PipelineError::Ingest { context, source }
    };

    let panel_text = read(&cfg.panel)?;
    let raw = parse_panel_csv(&panel_text).and_then(IndustryPanel::assemble).map_err(ingest_err(&cfg.panel))?;
    let deflators = match &cfg.deflators {
        Some(p) => Some(parse_deflator_csv(&read(p)?).map_err(ingest_err(p))?),
        None => None,
    };
    let annotations = match &cfg.annotations {
        Some(p) => parse_annotations(&read(p)?).map_err(|source| PipelineError::Annotations { path: p.clone(), source })?,
        None => BTreeMap::new(),
    };

    let panel = preprocess_panel(&raw, deflators.as_ref(), &cfg.margins)
        .map_err(|source| PipelineError::Ingest { context: "preprocessing".into(), source })?;
    let (train, test) = split_panel(&panel, cfg.train_end).map_err(|source| PipelineError::Ingest { context: "split".into(), source })?;
    let test_range = test.coverage();
    if !test_range.contains(cfg.shock_start) || cfg.shock_start == test_range.start {
        return Err(config_err("shock_start", format!("must lie strictly inside the test range {test_range}")));
    }
    let periods = SubPeriods::split(test_range, cfg.shock_start);
    log::info!("panel: {} industries, coverage {}, test {}", panel.len(), panel.coverage(), test_range);
    Ok(Inputs { panel, train, test, periods, annotations, digests })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdfRow {
    pub industry_id: String,
    pub stage: Stage,
    pub kind: Kind,
    #[serde(flatten)]
    pub result: AdfResult,
}

pub const ADF_HEADER: &str = "industry_id,stage,kind,statistic,lags_used,nobs,crit_1,crit_5,crit_10,reject_unit_root";

/// ADF test on every training series, in (industry, kind) order.
pub fn run_adf(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<AdfRow>, PipelineError> {
    let tasks: Vec<(&String, Stage, Kind, &[f64])> = inputs
        .train
        .iter()
        .flat_map(|(id, rec)| {
            [Kind::Demand, Kind::Inventory].map(|k| (id, rec.stage, k, rec.series(k).expect("present").values()))
        })
        .collect();
    cfg.pool()?.install(|| {
        tasks
            .par_iter()
            .map(|&(id, stage, kind, x)| {
                adf_test(x, &AdfConfig::default())
                    .map(|result| AdfRow { industry_id: id.clone(), stage, kind, result })
                    .map_err(|source| PipelineError::Adf { industry_id: id.clone(), kind, source })
            })
            .collect()
    })
}

pub fn adf_csv(rows: &[AdfRow]) -> String {
    let mut out = String::from(ADF_HEADER);
    out.push('\n');
    for r in rows {
        let a = &r.result;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.industry_id,
            r.stage.code(),
            r.kind,
            a.statistic,
            a.lags_used,
            a.nobs,
            a.crit_1,
            a.crit_5,
            a.crit_10,
            a.reject_unit_root
        ));
    }
    out
}

/// Seed for one (industry, kind, model) fit, independent of scheduling.
pub fn derive_seed(seed: u64, industry_id: &str, kind: Kind, model: ModelId) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{industry_id}/{kind}/{model}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// What a forecaster sees for one series.
#[derive(Debug, Clone, Copy)]
pub struct ForecastTask<'a> {
    pub train: &'a [f64],
    /// Realized test values, read only by rolling one-step forecasts.
    pub test: &'a [f64],
    /// Calendar month (0 = January) of `train[0]`.
    pub phase: usize,
    /// Differencing order chosen from the ADF test.
    pub d: usize,
    pub seed: u64,
}

/// Forecasts `task.test.len()` months after the training sample.
pub fn forecast_series(model: ModelId, cfg: &RunConfig, task: ForecastTask<'_>) -> Result<Vec<f64>, String> {
    let h = task.test.len();
    match model {
        ModelId::Sarima => {
            let fitted = select_sarima(task.train, &SarimaGrid::with_d(task.d)).map_err(|e| e.to_string())?;
            log::debug!("selected {}", fitted.model.spec);
            match cfg.horizon_mode {
                HorizonMode::Recursive => forecast_sarima(&fitted.model, task.train, h).map_err(|e| e.to_string()),
                HorizonMode::RollingOneStep => {
                    let mut history = task.train.to_vec();
                    let mut out = Vec::with_capacity(h);
                    for &actual in task.test {
                        out.push(forecast_sarima(&fitted.model, &history, 1).map_err(|e| e.to_string())?[0]);
                        history.push(actual);
                    }
                    Ok(out)
                }
            }
        }
        ModelId::TrendSeasonal => {
            let model = fit_trend_seasonal(task.train, &TrendSeasonalConfig::default()).map_err(|e| e.to_string())?;
            Ok(forecast_trend_seasonal(&model, h))
        }
        ModelId::Rnn => neural_forecast::<RnnModel>(cfg, task),
        ModelId::Lstm => neural_forecast::<LstmModel>(cfg, task),
    }
}

/// Decompose, scale the residual to [0, 1], train on its windows, predict,
/// then undo the scaling and add trend and season back.
fn neural_forecast<M: Recurrent>(cfg: &RunConfig, task: ForecastTask<'_>) -> Result<Vec<f64>, String> {
    let dec = decompose_values(task.train, 12, task.phase).map_err(|e| e.to_string())?;
    let resid = dec.filled_residual(task.train);
    let scaler = MinMaxRecipe::fit(&resid).map_err(|e| e.to_string())?;
    let scaled = scaler.apply(&resid);
    let windows = make_windows(&scaled, cfg.window).map_err(|e| e.to_string())?;
    let tc = TrainConfig { epochs: cfg.epochs, learning_rate: cfg.learning_rate, seed: task.seed, ..TrainConfig::default() };
    let outcome = fit::<M>(&windows, cfg.hidden, &tc).map_err(|e| e.to_string())?;
    let n = task.train.len() as i64;
    let test_resid: Vec<f64> = task
        .test
        .iter()
        .enumerate()
        .map(|(k, v)| scaler.scale(v - dec.trend_at(n + k as i64) - dec.seasonal_at(n + k as i64)))
        .collect();
    let pred = predict(&outcome.model, &scaled, &test_resid, task.test.len(), cfg.horizon_mode).map_err(|e| e.to_string())?;
    Ok(dec.recompose_ahead(&scaler.invert(&pred)))
}

/// Every configured model on every series of the panel.
pub fn run_forecasts(cfg: &RunConfig, inputs: &Inputs, adf: &[AdfRow]) -> Result<BTreeMap<ModelId, ForecastSet>, PipelineError> {
    let d_of: BTreeMap<(&str, Kind), usize> =
        adf.iter().map(|r| ((r.industry_id.as_str(), r.kind), usize::from(!r.result.reject_unit_root))).collect();
    let test_start = inputs.test.coverage().start;
    let mut tasks = Vec::new();
    for &model in &cfg.models {
        for (id, rec) in inputs.train.iter() {
            for kind in [Kind::Demand, Kind::Inventory] {
                tasks.push((model, id.as_str(), kind, rec));
            }
        }
    }
    let results: Vec<Result<((ModelId, String, Kind), ForecastPath), PipelineError>> = cfg.pool()?.install(|| {
        tasks
            .par_iter()
            .map(|&(model, id, kind, rec)| {
                let train = rec.series(kind).expect("present");
                let test = inputs.test.get(id).and_then(|r| r.series(kind)).expect("split keeps industries");
                let task = ForecastTask {
                    train: train.values(),
                    test: test.values(),
                    phase: train.start().month0(),
                    d: d_of.get(&(id, kind)).copied().unwrap_or(1),
                    seed: derive_seed(cfg.seed, id, kind, model),
                };
                let values = forecast_series(model, cfg, task)
                    .and_then(|v| match v.iter().position(|x| !x.is_finite()) {
                        Some(k) => Err(format!("non-finite forecast at step {k}")),
                        None => Ok(v),
                    })
                    .map_err(|reason| PipelineError::Forecast { model, industry_id: id.to_string(), kind, reason })?;
                log::debug!("{model} {id}/{kind} done");
                Ok(((model, id.to_string(), kind), ForecastPath { start: test_start, values }))
            })
            .collect()
    });
    let mut out: BTreeMap<ModelId, ForecastSet> = BTreeMap::new();
    for r in results {
        let ((model, id, kind), path) = r?;
        out.entry(model).or_default().insert((id, kind), path);
    }
    Ok(out)
}

pub const FORECASTS_HEADER: &str = "model,industry_id,kind,period,forecast,actual";

pub fn forecasts_csv(inputs: &Inputs, forecasts: &BTreeMap<ModelId, ForecastSet>) -> String {
    let mut out = String::from(FORECASTS_HEADER);
    out.push('\n');
    for (model, set) in forecasts {
        for ((id, kind), path) in set {
            let actual = inputs.test.get(id).and_then(|r| r.series(*kind));
            for (k, f) in path.values.iter().enumerate() {
                let period = path.start.add_months(k as i64);
                let a = actual.and_then(|s| s.index_of(period).map(|i| s.values()[i].to_string())).unwrap_or_default();
                out.push_str(&format!("{model},{id},{kind},{period},{f},{a}\n"));
            }
        }
    }
    out
}

/// Forecast-side and actual-side ratios for every industry, in id order.
/// Forecast-side production applies the same flow identity to the
/// forecast demand and inventory paths.
pub fn run_bullwhip(cfg: &RunConfig, inputs: &Inputs, best: &ForecastSet) -> Vec<AmplificationRecord> {
    let window = cfg.bullwhip_window;
    inputs
        .panel
        .iter()
        .map(|(id, rec)| {
            let actual = infer_production(&rec.demand, &rec.inventory).and_then(|p| amplification_ratio(&p, &rec.demand, window));
            let forecast = (|| {
                let path = |kind| {
                    best.get(&(id.clone(), kind)).ok_or(BullwhipError::WindowNotCovered { what: "forecast", window })
                };
                let (d, i) = (path(Kind::Demand)?, path(Kind::Inventory)?);
                let prod = production_values(&d.values, &i.values)?;
                let prod = rec.demand.with_kind(Kind::Production, d.start.add_months(1), prod)?;
                let demand = rec.demand.with_values(d.start, d.values.clone())?;
                amplification_ratio(&prod, &demand, window)
            })();
            AmplificationRecord::new(id.clone(), rec.stage, forecast, actual)
        })
        .collect()
}

/// Run identity embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub tool_version: &'static str,
    pub config: RunConfig,
    pub input_digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub run: RunInfo,
    pub best_model: ModelId,
    pub benchmark: BenchmarkTable,
    pub adf: Vec<AdfRow>,
    pub records: Vec<AmplificationRecord>,
    pub zones: ZoneSummary,
    pub annotations: BTreeMap<String, Annotation>,
    #[serde(skip)]
    pub forecasts: BTreeMap<ModelId, ForecastSet>,
    #[serde(skip)]
    pub forecasts_csv: String,
}

pub fn run_benchmark(inputs: &Inputs, forecasts: &BTreeMap<ModelId, ForecastSet>) -> Result<(BenchmarkTable, ModelId), PipelineError> {
    let table = benchmark(&inputs.test, forecasts, inputs.periods)?;
    let best = select_best(&table).ok_or(PipelineError::NoModel)?;
    log::info!("best model: {best}");
    Ok((table, best))
}

/// Every stage, in memory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Report, PipelineError> {
    let inputs = load_inputs(cfg)?;
    let adf = run_adf(cfg, &inputs)?;
    let forecasts = run_forecasts(cfg, &inputs, &adf)?;
    let (table, best) = run_benchmark(&inputs, &forecasts)?;
    let records = run_bullwhip(cfg, &inputs, &forecasts[&best]);
    let undefined = records.iter().filter(|r| r.status == RecordStatus::UndefinedRatio).count();
    if undefined > 0 {
        log::warn!("{undefined} industries have an undefined ratio");
    }
    let zones = summarize_zones(&records);
    Ok(Report {
        run: RunInfo { tool_version: TOOL_VERSION, config: cfg.clone(), input_digests: inputs.digests.clone() },
        best_model: best,
        benchmark: table,
        adf,
        zones,
        annotations: inputs.annotations.clone(),
        forecasts_csv: forecasts_csv(&inputs, &forecasts),
        forecasts,
        records,
    })
}

fn to_json<T: Serialize>(what: &'static str, value: &T) -> Result<String, PipelineError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Serialize { what, reason: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

impl Report {
    /// Output files other than `manifest.json`, by name.
    pub fn render(&self) -> Result<Vec<(&'static str, String)>, PipelineError> {
        let ok: Vec<AmplificationRecord> = self.records.iter().filter(|r| r.status == RecordStatus::Ok).cloned().collect();
        Ok(vec![
            ("adf.csv", adf_csv(&self.adf)),
            ("forecasts.csv", self.forecasts_csv.clone()),
            ("benchmark.csv", self.benchmark.to_csv()),
            ("benchmark.json", to_json("benchmark", &self.benchmark)?),
            ("ratios.csv", ratios_csv(&self.records)),
            ("scatter.csv", ratios_csv(&ok)),
            ("zones.json", to_json("zones", &self.zones)?),
            ("report.json", to_json("report", self)?),
        ])
    }
}

/// Provenance written next to the reports; the only output that varies
/// between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub config_path: Option<PathBuf>,
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub seed: u64,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// Writes every output into `cfg.out_dir`. If any write fails, the files
/// already written by this call are removed.
pub fn write_outputs(cfg: &RunConfig, report: &Report, config_path: Option<&Path>) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = report.render()?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION,
        config_path: config_path.map(Path::to_path_buf),
        config: cfg.clone(),
        out_dir: cfg.out_dir.clone(),
        jobs: cfg.jobs,
        seed: cfg.seed,
        input_digests: report.run.input_digests.clone(),
        output_digests: files.iter().map(|(name, body)| (name.to_string(), sha256_hex(body.as_bytes()))).collect(),
        created_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    files.push(("manifest.json", to_json("manifest", &manifest)?));

    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = cfg.out_dir.join(name);
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(io_err(&path)(e));
        }
        written.push(path);
    }
    Ok(written)
}
