use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Cross-response analysis of trades-and-quotes tick data.
///
/// Settings come from the `--config` TOML file; flags given here override
/// the matching keys. Commands that produce a single table print it to
/// stdout unless `--out` is given.
#[derive(Debug, Parser)]
#[command(name = "xresp", version)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads; overrides `jobs`. Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Random seed; overrides `synth.seed` (and the calibration seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse tick files and report days, events and rejected rows.
    Ingest(TickFiles),
    /// Write a synthetic market as trades/quotes files plus truth.json.
    Synth(SynthArgs),
    /// Measure the latent-factor calibration table by simulation.
    Calibrate(CalibrateArgs),
    /// Per-second trade signs: one sparse CSV and one JSON count file per day.
    Signs(TickFiles),
    /// Per-second midpoints: one CSV per day.
    Midpoints(TickFiles),
    /// Response function R_ij on the dense lag grid.
    Respond(PairArg),
    /// Sign correlator Theta_ij on the dense lag grid.
    Correlate(PairArg),
    /// Odd/even response noise of a pair.
    Noise(PairArg),
    /// Normalized market response matrices at the given lags.
    Matrix(MatrixArgs),
    /// Market, passive or active averages on the averaged lag grid.
    Average(AverageArgs),
    /// Stocks ranked by passive or active response.
    Rank(RankArgs),
    /// Power-law fit of a lag curve CSV (`tau,value[,count]`).
    Fit(FitArgs),
    /// Run the configured stages and write a manifest.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct TickFiles {
    #[arg(long)]
    pub symbol: String,
    #[arg(long, value_name = "FILE")]
    pub trades: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub quotes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of stocks (null market unless the config has a [synth] section).
    #[arg(long)]
    pub stocks: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 4_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 101)]
    pub rho_points: usize,
    /// Trade probabilities, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])]
    pub p_trade: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct PairArg {
    /// Ordered pair `I,J`: prices of I against trades of J.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pair: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Lags in seconds, comma separated; defaults to the configured matrix lags.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AverageMode {
    Passive,
    Active,
    Market,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Statistic {
    Response,
    Correlator,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(long, value_enum)]
    pub mode: AverageMode,
    /// Fixed stock of a passive or active average.
    #[arg(long)]
    pub stock: Option<String>,
    /// `market` or `sector:<name>`.
    #[arg(long, default_value = "market")]
    pub pool: String,
    #[arg(long, value_enum, default_value_t = Statistic::Response)]
    pub of: Statistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankMode {
    Passive,
    Active,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, value_enum)]
    pub mode: RankMode,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lags: Vec<u32>,
    /// Lag that decides the order; defaults to the configured primary lag.
    #[arg(long)]
    pub primary: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "FILE")]
    pub curve: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Stages to run, comma separated; defaults to the configured stages.
    #[arg(long, value_delimiter = ',')]
    pub stages: Vec<String>,
}
