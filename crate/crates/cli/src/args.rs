use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hvar", version, about = "Hierarchical vector autoregression: fit, forecast, simulate and evaluate")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario panel with its true coefficients.
    Simulate(SimulateArgs),
    /// Fit one model at a single penalty level.
    Fit(FitArgs),
    /// One-step-ahead forecast from a fitted model.
    Forecast(ForecastArgs),
    /// Rolling cross-validation of penalized methods.
    Cv(CvArgs),
    /// Tune, forecast and score a list of methods.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Scenario number: 1 componentwise, 2 own-other, 3 elementwise.
    #[arg(long)]
    pub scenario: u8,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub p: usize,
    /// Observations after the p presample columns.
    #[arg(long = "T", default_value_t = 100)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_u: f64,
    /// Own maxlag of the first block in scenario 2.
    #[arg(long, default_value_t = 1)]
    pub block1_own_lag: usize,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Panel CSV: header of series names, one row per time point.
    #[arg(long)]
    pub input: PathBuf,
    /// Standardize every series with full-sample statistics before fitting.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 25)]
    pub n_lambda: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_ratio: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "level", multiple = false)]
pub struct LevelArgs {
    /// Penalty level.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Position in the log grid, 0 being the largest level.
    #[arg(long)]
    pub lambda_index: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub p: usize,
    /// hvar-c, hvar-o, hvar-e, lasso, lwlasso:<alpha>, ls, ls:<lag> or ls-aic.
    #[arg(long)]
    pub method: String,
    #[command(flatten)]
    pub level: LevelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Truth sidecar from `simulate`, for scoring the fitted maxlags.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForecastArgs {
    /// Panel CSV whose next time point is forecast.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory written by `fit`.
    #[arg(long)]
    pub model_dir: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub tune_frac: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub eval_frac: f64,
    /// Explicit windows as 0-based target rows (overrides the fractions).
    #[arg(long, requires_all = ["tune_end", "eval_start", "eval_end"])]
    pub tune_start: Option<usize>,
    #[arg(long, requires = "tune_start")]
    pub tune_end: Option<usize>,
    #[arg(long, requires = "tune_start")]
    pub eval_start: Option<usize>,
    #[arg(long, requires = "tune_start")]
    pub eval_end: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuningArgs {
    #[arg(long)]
    pub p: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub one_se_rule: bool,
    #[arg(long)]
    pub relaxed_ridge: bool,
    #[arg(long, default_value_t = 1e-2)]
    pub ridge_scale: f64,
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub alpha_grid: String,
    #[arg(long, default_value_t = 1)]
    pub refit_every: usize,
    /// Re-estimate standardization inside every training window.
    #[arg(long)]
    pub strict_standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated penalized methods.
    #[arg(long, default_value = "hvar-c,hvar-o,hvar-e,lasso,lwlasso")]
    pub methods: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub windows: WindowArgs,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Panel CSV; omit to simulate replicates of `--scenario`.
    #[arg(long, conflicts_with = "scenario")]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    pub standardize: bool,
    /// Truth sidecar for lag-selection scores on `--input`.
    #[arg(long, requires = "input")]
    pub truth: Option<PathBuf>,
    #[arg(long, required_unless_present = "input", requires_all = ["k"])]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "T", default_value_t = 100)]
    pub t: usize,
    /// Replicate seeds: `a..b` or a comma-separated list.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = 1)]
    pub block1_own_lag: usize,
    #[arg(long, default_value = "hvar-c,hvar-o,hvar-e,lasso,lwlasso,ls,mean,rw")]
    pub methods: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub windows: WindowArgs,
    #[arg(long)]
    pub output_dir: PathBuf,
}
