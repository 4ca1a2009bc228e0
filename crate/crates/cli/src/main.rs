//! `winterbottom`: builds Wulff and Winterbottom shapes, evaluates energies, runs the
//! minimizers, the polyomino oracle and stability sweeps.

mod commands;
mod density;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const CONSTRUCTION: u8 = 3;
    pub const WETTING: u8 = 4;
    pub const VERIFICATION: u8 = 5;

    pub fn new(code: u8, message: impl Display) -> Self {
        Self { code, message: message.to_string() }
    }

    pub fn config(message: impl Display) -> Self {
        Self::new(Self::CONFIG, message)
    }

    pub fn construction(message: impl Display) -> Self {
        Self::new(Self::CONSTRUCTION, message)
    }

    pub fn io(message: impl Display) -> Self {
        Self::new(Self::IO, message)
    }
}

#[derive(Parser, Debug)]
#[command(name = "winterbottom", version, about = "Equilibrium crystal shapes on a flat substrate")]
struct Cli {
    /// Worker threads for trials and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Omit the timestamp comment from SVG output.
    #[arg(long, global = true)]
    reproducible: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Surface tension: pnorm:P, weighted:[[..]], support:[[..]], crystalline:[[..]], JSON or @file.
    #[arg(long)]
    pub phi: Option<String>,
    /// Ambient dimension (2 or 3).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Run config JSON; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Primary output file; companion artifacts share its stem.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wulff shape of a density.
    Wulff {
        #[command(flatten)]
        common: Common,
        /// Number of sampled normal directions.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Winterbottom shape of given volume with its energy, regime and Young residual.
    Winterbottom {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        volume: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Minimize the energy from random starts and compare with the Winterbottom shape.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        volume: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Polygon vertices for gradient descent.
        #[arg(long)]
        nvertices: Option<usize>,
        /// Annealing steps for non-smooth densities.
        #[arg(long)]
        anneal_steps: Option<usize>,
    },
    /// Exhaustive polyomino minimum of the pixel energy.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Asymmetry and deficit over a perturbation family of the Winterbottom shape.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        volume: Option<f64>,
        /// rect, noise or shear.
        #[arg(long)]
        family: Option<String>,
        /// Number of family members.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Energies of flat slabs of growing radius.
    WettingDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        volume: Option<f64>,
        /// Largest radius; radii run over 1, 2, ..., this value.
        #[arg(long)]
        max_radius: Option<u32>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::config("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot configure thread pool: {e}")))?;
    }
    let out = commands::Output::new(cli.reproducible);
    match cli.command {
        Command::Wulff { common, n } => commands::wulff(&common, n, &out),
        Command::Winterbottom { common, lambda, volume, n } => commands::winterbottom(&common, lambda, volume, n, &out),
        Command::Optimize { common, lambda, volume, trials, seed, nvertices, anneal_steps } => {
            commands::optimize(&common, commands::OptimizeArgs { lambda, volume, trials, seed, nvertices, anneal_steps }, &out)
        }
        Command::Oracle { common, lambda, cells } => commands::oracle(&common, lambda, cells, &out),
        Command::Stability { common, lambda, volume, family, n, seed } => {
            commands::stability(&common, lambda, volume, family, n, seed, &out)
        }
        Command::WettingDemo { common, lambda, volume, max_radius } => {
            commands::wetting_demo(&common, lambda, volume, max_radius, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WINTERBOTTOM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
