//! `chainlab`: equilibria, spectra, stability sweeps and brake-orbit
//! branches of planar bead-spring chains.

mod commands;
mod config;
mod error;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "chainlab", version, about = "Equilibria, spectra and periodic orbits of planar molecular chains")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// INI-style configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of particles.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// neumann (open chain) or periodic (ring).
    #[arg(long, global = true)]
    boundary: Option<String>,
    /// Lennard-Jones attraction.
    #[arg(long = "A", global = true, value_name = "A")]
    a: Option<f64>,
    /// Lennard-Jones repulsion.
    #[arg(long = "B", global = true, value_name = "B")]
    b: Option<f64>,
    /// Coulomb coefficient.
    #[arg(long = "C", global = true, value_name = "C")]
    c: Option<f64>,
    /// Physical constants file (epsilon, sigma, b, k, q, m), or `carbon`.
    #[arg(long, global = true, value_name = "FILE")]
    physical: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Significant digits in output files (6 to 17).
    #[arg(long, global = true)]
    precision: Option<usize>,
    /// Equilibrium solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Equilibrium solver iteration limit.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the collinear or circular equilibrium.
    Equilibrium,
    /// Hessian spectrum of the equilibrium with bifurcation candidates.
    Spectrum,
    /// Size and negative-eigenvalue count over an (A, B) grid.
    Sweep(SweepArgs),
    /// Reproduce the six-carbon eigenvalues and the negative counts for n = 3..11.
    #[command(name = "carbon-table", alias = "table1")]
    CarbonTable,
    /// Seed, shoot and continue brake-orbit branches.
    Orbit(OrbitArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// A axis as lo:hi:steps.
    #[arg(long = "grid-a", value_name = "LO:HI:STEPS")]
    grid_a: Option<String>,
    /// B axis as lo:hi:steps.
    #[arg(long = "grid-b", value_name = "LO:HI:STEPS")]
    grid_b: Option<String>,
}

#[derive(Args)]
struct OrbitArgs {
    /// Block index k of the seeding eigenvalue, or `all`.
    #[arg(long)]
    seed: Option<String>,
    /// Amplitude of the seed orbit.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Shooting tolerance on the brake residual.
    #[arg(long = "shoot-tol")]
    shoot_tol: Option<f64>,
    /// Continuation step limit.
    #[arg(long = "max-steps")]
    max_steps: Option<usize>,
    /// Bound on the orbit amplitude.
    #[arg(long = "max-amplitude")]
    max_amplitude: Option<f64>,
    /// Bound on the full period.
    #[arg(long = "max-period")]
    max_period: Option<f64>,
    /// pin (amplitude pinning) or arclength.
    #[arg(long)]
    corrector: Option<String>,
    /// Also write one period of the first orbit of each branch.
    #[arg(long = "dump-trajectory")]
    dump_trajectory: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut raw = match &c.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    if let Some(p) = &c.physical {
        raw.load_physical(p)?;
    }
    RawConfig::set(&mut raw.model, "n", c.n);
    RawConfig::set(&mut raw.model, "boundary", c.boundary.as_ref());
    RawConfig::set(&mut raw.model, "A", c.a);
    RawConfig::set(&mut raw.model, "B", c.b);
    RawConfig::set(&mut raw.model, "C", c.c);
    RawConfig::set(&mut raw.output, "dir", c.out.as_ref().map(|p| p.display()));
    RawConfig::set(&mut raw.output, "format", c.format.as_ref());
    RawConfig::set(&mut raw.output, "precision", c.precision);
    RawConfig::set(&mut raw.command, "tol", c.tol);
    RawConfig::set(&mut raw.command, "max_iter", c.max_iter);
    match &cli.command {
        Command::Sweep(s) => {
            RawConfig::set(&mut raw.command, "grid_a", s.grid_a.as_ref());
            RawConfig::set(&mut raw.command, "grid_b", s.grid_b.as_ref());
        }
        Command::Orbit(o) => {
            RawConfig::set(&mut raw.command, "seed", o.seed.as_ref());
            RawConfig::set(&mut raw.command, "amplitude", o.amplitude);
            RawConfig::set(&mut raw.command, "shoot_tol", o.shoot_tol);
            RawConfig::set(&mut raw.command, "max_steps", o.max_steps);
            RawConfig::set(&mut raw.command, "max_amplitude", o.max_amplitude);
            RawConfig::set(&mut raw.command, "max_period", o.max_period);
            RawConfig::set(&mut raw.command, "corrector", o.corrector.as_ref());
            if o.dump_trajectory {
                raw.command.insert("dump_trajectory".into(), "true".into());
            }
        }
        _ => {}
    }
    RunConfig::resolve(raw)
}

/// Caps the worker pool from `CHAINLAB_THREADS` (0 or unset means automatic).
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CHAINLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("CHAINLAB_THREADS must be a non-negative integer, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = build_config(&cli)?;
    match cli.command {
        Command::Equilibrium => commands::equilibrium(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
        Command::CarbonTable => commands::carbon_table(&cfg),
        Command::Orbit(_) => commands::orbit(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chainlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
