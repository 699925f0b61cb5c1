//! Batch front end for `gpalign`: dataset generation, fitting, evaluation and
//! manifold sampling over CSV bundles.

pub mod bundle;
pub mod commands;
pub mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "GPALIGN_WORKERS";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, missing or malformed files, unwritable paths. Exit code 2.
    Input(String),
    /// The fit stopped on a numerical failure. Exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gpalign_core::Error> for CliError {
    fn from(e: gpalign_core::Error) -> Self {
        match e {
            gpalign_core::Error::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gpalign", version, about = "Align, cluster and warp multiple time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset bundle with known warps.
    Generate(GenerateArgs),
    /// Fit a model (or DTW) to a bundle.
    Fit(FitArgs),
    /// Score fitted warps and alignments against a bundle.
    Eval(EvalArgs),
    /// Predict a sequence at a new latent location.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long = "J", default_value_t = 5)]
    pub j: usize,
    #[arg(long = "N", default_value_t = 50)]
    pub n: usize,
    #[arg(long = "D", default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub groups: usize,
    #[arg(long, default_value_t = 1.0)]
    pub warp_roughness: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output bundle directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input bundle directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Results directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// ours, energy+gplvm, gplvm+basis, energy+basis or dtw.
    #[arg(long, default_value = "ours")]
    pub method: String,
    /// TOML file with fit settings; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// Use the sparse bound with this many inducing inputs.
    #[arg(long)]
    pub inducing: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub lvm_weight: Option<f64>,
    #[arg(long)]
    pub basis_count: Option<usize>,
    /// Learn the warp smoothness kernel.
    #[arg(long)]
    pub optimize_omega: bool,
    /// Freeze latent points and warps for this many initial iterations.
    #[arg(long)]
    pub two_stage: Option<usize>,
    /// Also write warps.svg and aligned.svg.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Comma-separated latent coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Sizes the global worker pool from [`WORKERS_ENV`], if set.
pub fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Eval(a) => {
            print!("{}", commands::eval(&a)?);
            Ok(())
        }
        Command::Sample(a) => commands::sample(&a),
    }
}
