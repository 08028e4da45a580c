mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluordet::{InitialState, McMode, Scheme};

use crate::config::RunConfig;
use crate::failure::Failure;

/// Fluorescence qubit-detection models: leak parameters, count
/// distributions, fidelity optimization, Monte Carlo, fitting and CCD
/// register simulation.
#[derive(Debug, Parser)]
#[command(name = "fluordet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file, or directory for commands that write several files.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Built-in species: cd111, yb171 or hg199.
    #[arg(long)]
    species: Option<String>,
    /// Excited manifold addressed by the detection laser.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Total collection efficiency.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the leak parameters for a species and laser setting.
    Params(Common),
    /// Write dark and bright photon-count distributions as CSV.
    Dist(Common),
    /// Optimize light level and threshold for the best detection fidelity.
    Optimize(Common),
    /// Tabulate numeric and approximate infidelity against collection efficiency.
    Curve(Common),
    /// Reproduce the P1/2-scheme fidelity table for the built-in species.
    Table1(Common),
    /// Simulate a photon-count histogram by Monte Carlo.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<McMode>,
        #[arg(long, value_parser = parse_initial)]
        initial: Option<InitialState>,
    },
    /// Fit dark and bright histograms for efficiency, saturation and impurity.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dark-prepared histogram CSV.
        #[arg(long, value_name = "PATH")]
        dark: Option<PathBuf>,
        /// Bright-prepared histogram CSV.
        #[arg(long, value_name = "PATH")]
        bright: Option<PathBuf>,
        /// Also fit a Poisson background count.
        #[arg(long)]
        fit_background: bool,
    },
    /// Simulate CCD register frames, read them out and report correlations.
    CcdSim(Common),
    /// Print the fraction of a neighbor's fluorescence reaching an ion.
    Crosstalk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wavelength_nm: Option<f64>,
        #[arg(long)]
        spacing_um: Option<f64>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: fluordet::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<McMode, String> {
    s.parse().map_err(|e: fluordet::Error| e.to_string())
}

fn parse_initial(s: &str) -> Result<InitialState, String> {
    s.parse().map_err(|e: fluordet::Error| e.to_string())
}

/// Loads the config file, if any, and lays the command-line flags over it.
fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    if common.species.is_some() {
        cfg.species.clone_from(&common.species);
        cfg.species_data = None;
    }
    cfg.scheme = common.scheme.or(cfg.scheme);
    cfg.eta = common.eta.or(cfg.eta);
    cfg.seed = common.seed.or(cfg.seed);
    cfg.trials = common.trials.or(cfg.trials);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Params(c) => commands::params(&resolve(&c)?, c.out.as_deref()),
        Command::Dist(c) => commands::dist(&resolve(&c)?, c.out.as_deref()),
        Command::Optimize(c) => commands::optimize(&resolve(&c)?, c.out.as_deref()),
        Command::Curve(c) => commands::curve(&resolve(&c)?, c.out.as_deref()),
        Command::Table1(c) => commands::table1(&resolve(&c)?, c.out.as_deref()),
        Command::Mc {
            common,
            mode,
            initial,
        } => {
            let mut cfg = resolve(&common)?;
            cfg.mode = mode.or(cfg.mode);
            cfg.initial = initial.or(cfg.initial);
            commands::mc(&cfg, common.out.as_deref())
        }
        Command::Fit {
            common,
            dark,
            bright,
            fit_background,
        } => {
            let mut cfg = resolve(&common)?;
            cfg.dark_csv = dark.or(cfg.dark_csv);
            cfg.bright_csv = bright.or(cfg.bright_csv);
            if fit_background {
                cfg.fit_background = Some(true);
            }
            commands::fit(&cfg, common.out.as_deref())
        }
        Command::CcdSim(c) => commands::ccd_sim(&resolve(&c)?, c.out.as_deref()),
        Command::Crosstalk {
            common,
            wavelength_nm,
            spacing_um,
        } => {
            let mut cfg = resolve(&common)?;
            cfg.wavelength_nm = wavelength_nm.or(cfg.wavelength_nm);
            cfg.spacing_um = spacing_um.or(cfg.spacing_um);
            commands::crosstalk(&cfg, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let kind = match failure {
                Failure::Invalid(_) => "invalid input",
                Failure::Runtime(_) => "error",
            };
            eprintln!("fluordet: {kind}: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
