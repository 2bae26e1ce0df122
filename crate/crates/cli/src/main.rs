use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Separability classification and exponential coordinates for density operators.
#[derive(Debug, Parser)]
#[command(name = "husep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide separability from the growth of the B_k trajectory.
    Classify(Common),
    /// Exponential coordinates b of an interior separable state.
    Coordinatize(Common),
    /// State chi(b) from coordinates b.
    Reconstruct(Common),
    /// Separating hyperplane for an entangled state.
    Witness(Common),
    /// Classify Werner states on an evenly spaced grid of p in [0, 1].
    WernerSweep {
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the embedded checks and print a pass/fail table.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// JSON report path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skew the design weights (negative control).
        #[arg(long, hide = true)]
        corrupt_design_weights: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Mc,
    Design,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Matrix file in the JSON {"dims", "re", "im"} format.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Factor dimensions, e.g. 2,2 or 2x3.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Vec<usize>>,
    /// Defaults to mc for classification and design for coordinates.
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    /// Defaults to twice the largest order (classification) or 4 (coordinates).
    #[arg(long)]
    pub design_strength: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<u32>>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub bound_threshold: Option<f64>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON-lines log of every solver iteration.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// CSV of (k, ||B_k||, G_k value), or of the sweep rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<Vec<usize>, String> {
    s.split([',', 'x'])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad factor dimension '{p}': {e}")))
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Classify(c) => commands::classify(&c),
        Command::Coordinatize(c) => commands::coordinatize(&c),
        Command::Reconstruct(c) => commands::reconstruct(&c),
        Command::Witness(c) => commands::witness(&c),
        Command::WernerSweep { grid, common } => commands::werner_sweep(grid, &common),
        Command::Selftest {
            seed,
            output,
            corrupt_design_weights,
        } => commands::selftest(seed, output.as_deref(), corrupt_design_weights),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
