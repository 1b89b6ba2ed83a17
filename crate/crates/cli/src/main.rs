//! `bwe`: command-line driver for the bullwhip measurement pipeline.
//!
//! Option precedence is flag > manifest > built-in default. The manifest
//! path comes from `--config` or the `BWE_CONFIG` environment variable.
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bullwhip_core::calendar::YearMonth;
use bullwhip_core::pipeline::{
    adf_csv, forecasts_csv, load_inputs, run_adf, run_benchmark, run_bullwhip, run_forecasts, run_pipeline,
    write_outputs, Manifest, PipelineError, RunConfig,
};
use bullwhip_core::bullwhip::ratios_csv;
use bullwhip_core::synth::{synthetic_panel, PanelConfig, SynthError};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bwe", version, about = "Bullwhip measurement on monthly industry panels")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the deflated, margin-adjusted panel as CSV.
    Ingest(RunArgs),
    /// Print ADF results for every training series.
    Adf(RunArgs),
    /// Print every model's test-period forecasts.
    Forecast(RunArgs),
    /// Print the MAPE benchmark table.
    Benchmark(RunArgs),
    /// Print forecast and actual amplification ratios per industry.
    Bullwhip(RunArgs),
    /// Print the full JSON report.
    Report(RunArgs),
    /// Run every stage and write all outputs to the output directory.
    Pipeline(RunArgs),
    /// Generate a synthetic panel CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Pipeline manifest (TOML).
    #[arg(long, env = "BWE_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long)]
    deflators: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Gross margin rate for a stage, e.g. `W=0.15`; repeatable.
    #[arg(long = "margin", value_parser = parse_margin)]
    margins: Vec<(String, f64)>,
    /// Last training month (YYYY-MM).
    #[arg(long)]
    train_end: Option<YearMonth>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of sarima, trend_seasonal, rnn, lstm.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// rolling (one-step with actual lags) or recursive.
    #[arg(long)]
    horizon_mode: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config (TOML); omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    months: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_margin(s: &str) -> Result<(String, f64), String> {
    let (stage, rate) = s.split_once('=').ok_or_else(|| format!("expected STAGE=RATE, got {s:?}"))?;
    let rate = rate.trim().parse::<f64>().map_err(|e| format!("rate {rate:?}: {e}"))?;
    Ok((stage.trim().to_string(), rate))
}

#[derive(Debug)]
enum CliError {
    Usage { stage: &'static str, message: String },
    Runtime { stage: &'static str, message: String },
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let stage = e.stage();
        let message = e.to_string();
        if stage == "config" {
            CliError::Usage { stage, message }
        } else {
            CliError::Runtime { stage, message }
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime { stage: "io", message: format!("{}: {e}", path.display()) }
}

fn absolute(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        std::env::current_dir().map(|d| d.join(&p)).unwrap_or(p)
    }
}

impl RunArgs {
    /// Flags as a manifest layer; relative paths are taken from the
    /// working directory.
    fn as_manifest(&self) -> Manifest {
        Manifest {
            panel: self.panel.clone().map(absolute),
            deflators: self.deflators.clone().map(absolute),
            annotations: self.annotations.clone().map(absolute),
            margins: (!self.margins.is_empty()).then(|| self.margins.iter().cloned().collect()),
            train_end: self.train_end,
            out_dir: self.out_dir.clone().map(absolute),
            seed: self.seed,
            models: self.models.clone(),
            horizon_mode: self.horizon_mode.clone(),
            jobs: self.jobs,
            window: self.window,
            hidden: self.hidden,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            ..Manifest::default()
        }
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let (file, base) = match &self.config {
            Some(path) => {
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (Manifest::load(path)?, absolute(dir))
            }
            None => (Manifest::default(), absolute(PathBuf::new())),
        };
        Ok(RunConfig::resolve(file.overlay(self.as_manifest()), &base)?)
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(io_error(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Pipeline(args) => {
            let cfg = args.resolve()?;
            let report = run_pipeline(&cfg)?;
            let written = write_outputs(&cfg, &report, args.config.as_deref())?;
            println!("wrote {} files to {} (best model {})", written.len(), cfg.out_dir.display(), report.best_model);
            Ok(())
        }
        Command::Report(args) => {
            let cfg = args.resolve()?;
            let report = run_pipeline(&cfg)?;
            let body = report.render()?.into_iter().find(|(name, _)| *name == "report.json").map(|(_, b)| b).unwrap_or_default();
            emit(args.output.as_deref(), &body)
        }
        Command::Ingest(args) => {
            let cfg = args.resolve()?;
            emit(args.output.as_deref(), &load_inputs(&cfg)?.panel.to_csv())
        }
        Command::Adf(args) => {
            let cfg = args.resolve()?;
            let inputs = load_inputs(&cfg)?;
            emit(args.output.as_deref(), &adf_csv(&run_adf(&cfg, &inputs)?))
        }
        Command::Forecast(args) => {
            let cfg = args.resolve()?;
            let inputs = load_inputs(&cfg)?;
            let forecasts = run_forecasts(&cfg, &inputs, &run_adf(&cfg, &inputs)?)?;
            emit(args.output.as_deref(), &forecasts_csv(&inputs, &forecasts))
        }
        Command::Benchmark(args) => {
            let cfg = args.resolve()?;
            let inputs = load_inputs(&cfg)?;
            let forecasts = run_forecasts(&cfg, &inputs, &run_adf(&cfg, &inputs)?)?;
            let (table, _) = run_benchmark(&inputs, &forecasts)?;
            emit(args.output.as_deref(), &table.to_csv())
        }
        Command::Bullwhip(args) => {
            let cfg = args.resolve()?;
            let inputs = load_inputs(&cfg)?;
            let forecasts = run_forecasts(&cfg, &inputs, &run_adf(&cfg, &inputs)?)?;
            let (_, best) = run_benchmark(&inputs, &forecasts)?;
            emit(args.output.as_deref(), &ratios_csv(&run_bullwhip(&cfg, &inputs, &forecasts[&best])))
        }
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let usage = |message: String| CliError::Usage { stage: "simulate", message };
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            toml::from_str::<PanelConfig>(&text).map_err(|e| usage(format!("{}: {}", path.display(), e.message())))?
        }
        None => PanelConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(months) = args.months {
        cfg.months = months;
    }
    let csv = synthetic_panel(&cfg).map_err(|e| match e {
        SynthError::InvalidConfig(m) => usage(m),
        other => CliError::Runtime { stage: "simulate", message: other.to_string() },
    })?;
    emit(args.output.as_deref(), &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("BWE_LOG").init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, stage, message) = match e {
                CliError::Usage { stage, message } => (2, stage, message),
                CliError::Runtime { stage, message } => (1, stage, message),
            };
            let line = serde_json::json!({ "error": { "stage": stage, "message": message } });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
