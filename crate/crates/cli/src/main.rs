//! `lattice-ent`: band structure, synthetic stacks, stack analysis and the
//! analytic and sampled checks of the entanglement bound.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_entanglement::Error;

use crate::config::{LatticeArgs, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Capacity(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Capacity(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Capacity { .. } => CliError::Capacity(msg),
            Error::Numerical(_)
            | Error::Accuracy(_)
            | Error::DegenerateEnvelope(..)
            | Error::HermiticityViolation { .. }
            | Error::Coverage(_) => CliError::Numerical(msg),
            Error::InvalidArgument { .. }
            | Error::Range(_)
            | Error::Geometry(_)
            | Error::ExcludedPixels(_)
            | Error::Format { .. }
            | Error::Io { .. } => CliError::Validation(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lattice-ent",
    version,
    about = "Entanglement lower bounds for lattice bosons from time-of-flight images"
)]
struct Cli {
    /// TOML run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the lattice band structure and write Wannier and envelope tables.
    Bands {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Number of bands to report.
        #[arg(long, default_value_t = 5)]
        bands: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a many-body state, expand it and synthesize an image stack.
    Simulate(Box<commands::SimulateArgs>),
    /// Analyze an image stack and write the bound report and per-pixel map.
    Analyze {
        /// Stack manifest, or the directory holding `manifest.toml`.
        stack: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Average over the region only, without symmetry-related pixels.
        #[arg(long)]
        no_symmetry: bool,
        /// Region pixels as `i,j` pairs (repeatable); defaults to the 5x5 box at the zone corner.
        #[arg(long = "pixel", value_parser = commands::parse_pixel)]
        pixels: Vec<(usize, usize)>,
    },
    /// Print the closed-form bounds and data-hiding probabilities of the example states.
    Examples {
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the small-system interaction and temperature sweeps as CSV.
    Reproduce {
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        atoms: Option<usize>,
        /// `chain`, `ring`, or `auto` (chain for two sites, ring otherwise).
        #[arg(long)]
        geometry: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampled witness and local-channel checks.
    Verify {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        channel_states: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Bands {
            lattice,
            bands,
            out,
        } => commands::bands(&config, &lattice, bands, &out),
        Command::Simulate(args) => commands::simulate(&config, &args),
        Command::Analyze {
            stack,
            out,
            no_symmetry,
            pixels,
        } => commands::analyze(&config, &stack, &out, no_symmetry, pixels),
        Command::Examples { out } => commands::examples(out.as_deref()),
        Command::Reproduce {
            sites,
            atoms,
            geometry,
            out,
        } => commands::reproduce(&config, sites, atoms, geometry, &out),
        Command::Verify {
            trials,
            channel_states,
            seed,
        } => commands::verify(&config, trials, channel_states, seed),
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
