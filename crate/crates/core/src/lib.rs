//! Bullwhip-effect measurement on monthly industry panels.
//!
//! The crate covers the whole chain from raw panel CSVs to zone summaries:
//! ingest and preprocessing, unit-root testing, four counterfactual
//! forecasters (seasonal ARIMA, an additive trend/seasonal regression, an
//! Elman RNN and an LSTM), MAPE benchmarking, and variance-amplification
//! ratios on log-differenced production and demand.

pub mod bullwhip;
pub mod calendar;
pub mod evaluation;
pub mod ingest;
pub mod neural;
pub mod pipeline;
pub mod sarima;
pub mod series;
pub mod stationarity;
pub mod synth;
pub mod trend_seasonal;

mod linalg;

pub use calendar::{MonthRange, YearMonth};
pub use series::{Kind, MonthlySeries, SeriesError, Stage};
