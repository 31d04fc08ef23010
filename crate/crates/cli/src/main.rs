mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvvar::TvvarError;

use crate::config::{TransformChoice, VolChoice};

/// Time-varying VAR filtering, forecasting, model selection and portfolio
/// backtests on CSV data.
#[derive(Debug, Parser)]
#[command(name = "tvvar", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "TVVAR_OUT_DIR", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Value columns to use, in order (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    /// Name of the time column (default: detected from the header).
    #[arg(long)]
    pub time_column: Option<String>,
    /// Convert prices to returns before fitting.
    #[arg(long, value_enum)]
    pub transform: Option<TransformChoice>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Autoregressive order.
    #[arg(long)]
    pub d: Option<usize>,
    /// Coefficient discount factor.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Volatility discount factor.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    /// Orders to evaluate (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    /// Coefficient discounts to evaluate.
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    /// Volatility discounts to evaluate.
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic series from the model.
    Simulate(SimulateArgs),
    /// Filter a series and write the posterior path and diagnostics.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Multi-step forecasts with credible bounds from a fitted state.
    Forecast(ForecastArgs),
    /// Rank a hyperparameter grid by log-likelihood and trace Bayes factors.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// MSSE, MAE and ME at several horizons.
    Metrics {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Forecast horizons (comma separated).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
    /// Sequential portfolio backtest.
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub volatility: Option<VolChoice>,
    /// Initial volatility as a multiple of the identity.
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Lag-one coefficient on the diagonal of the true VAR.
    #[arg(long)]
    pub ar: Option<f64>,
    /// Nominal spread (multiple of the identity) driving coefficient drift.
    #[arg(long)]
    pub pstar: Option<f64>,
    /// Abort when an observation's norm exceeds this.
    #[arg(long)]
    pub guard: Option<f64>,
    /// Where to write the series (default: OUT/sim.csv).
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Fitted state written by `fit` (default: OUT/fit_state.json).
    #[arg(long, value_name = "FILE")]
    pub state: Option<PathBuf>,
    /// Largest horizon.
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// Credible level of the bounds.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    /// Discount the spread at every step (recursive) or linearly (constant).
    #[arg(long)]
    pub constant_discount: bool,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Target return per period.
    #[arg(long)]
    pub target: Option<f64>,
    /// Strategies to run (up, cp, ewp).
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Compound returns instead of summing them.
    #[arg(long)]
    pub compound: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] TvvarError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(TvvarError::InvalidConfig(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(&ctx, &args),
        Command::Fit { data, model } => commands::fit(&ctx, &data, &model),
        Command::Forecast(args) => commands::forecast(&ctx, &args),
        Command::Select { data, grid } => commands::select(&ctx, &data, &grid),
        Command::Metrics { data, grid, horizons } => commands::metrics(&ctx, &data, &grid, horizons.as_deref()),
        Command::Backtest(args) => commands::backtest(&ctx, &args),
    }
}
