use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod options;
mod output;

use error::CliError;
use options::{KernelArgs, PanelArgs, StructuralArgs};

#[derive(Debug, Parser)]
#[command(
    name = "dyadnp",
    version,
    about = "Nonparametric estimation for nonseparable dyadic models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo study and write the averaged curves.
    Simulate(SimulateArgs),
    /// Estimate the structural function or the error distribution.
    #[command(subcommand)]
    Estimate(EstimateCommand),
    /// Conditional CDF of Y given covariate subvectors of both agents.
    Cdf(CdfArgs),
    /// Structural estimate against the Nadaraya-Watson benchmark along x_i.
    CompareNw(CompareNwArgs),
    /// Evaluate the bandwidth rate conditions.
    DiagnoseRates(RatesArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Study configuration (JSON, flat keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum EstimateCommand {
    /// g(x_i, x_j, e) at a point or along a grid.
    G(EstimateGArgs),
    /// F_e(e) at a point or along a grid.
    Fe(EstimateFeArgs),
}

#[derive(Debug, Args)]
struct EstimateGArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    structural: StructuralArgs,
    /// Sender covariates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    xi: Vec<f64>,
    /// Receiver covariates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    xj: Vec<f64>,
    /// Error value (single query or fixed value along an x grid).
    #[arg(long, allow_hyphen_values = true)]
    e: Option<f64>,
    /// Grid `lo,hi,count` over e.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    e_grid: Option<Vec<f64>>,
    /// Grid `lo,hi,count` over coordinate `--coordinate` of x_i.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    coordinate: usize,
    /// Append a normal-approximation interval at this level.
    #[arg(long)]
    ci: Option<f64>,
    /// Write the curve here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateFeArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    structural: StructuralArgs,
    #[arg(long, allow_hyphen_values = true)]
    e: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    e_grid: Option<Vec<f64>>,
    /// Sender X0 values (conditional independence on X0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0_i: Option<Vec<f64>>,
    /// Receiver X0 values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0_j: Option<Vec<f64>>,
    #[arg(long)]
    ci: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CdfArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    w1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    w2: Vec<f64>,
    /// Covariate indices forming W (0-based); all covariates by default.
    #[arg(long, value_delimiter = ',')]
    subvector: Option<Vec<usize>>,
    /// Also write the CDF on `--y-grid` as `y,value`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CompareNwArgs {
    /// Study configuration supplying the design, slice and normalization.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the simulated panel when no data files are given.
    #[arg(long)]
    seed: Option<u64>,
    /// Agents CSV; with `--dyads`, replaces the simulated panel.
    #[arg(long, requires = "dyads")]
    agents: Option<PathBuf>,
    #[arg(long, requires = "agents")]
    dyads: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    /// Number of agents N.
    #[arg(long)]
    num_agents: usize,
    /// Covariate dimension K.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Conditioning dimension d_W (defaults to K).
    #[arg(long)]
    d_w: Option<usize>,
    /// Kernel order.
    #[arg(long, default_value_t = 2)]
    order: u32,
    /// Covariate bandwidth (defaults to the rule of thumb at N).
    #[arg(long)]
    h: Option<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a.config.as_deref(), &a.out, a.seed, a.threads),
        Command::Estimate(EstimateCommand::G(a)) => commands::estimate_g(a),
        Command::Estimate(EstimateCommand::Fe(a)) => commands::estimate_fe(a),
        Command::Cdf(a) => commands::cdf(a),
        Command::CompareNw(a) => commands::compare_nw(a),
        Command::DiagnoseRates(a) => commands::diagnose_rates(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
