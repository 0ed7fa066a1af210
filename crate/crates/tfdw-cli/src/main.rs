//! Command-line front end for the tfdw laboratory.
//!
//! One JSON configuration document drives every subcommand; `--set`
//! overrides individual keys through dotted paths, and artifacts land in
//! the configured output directory (TFDW_OUT overrides it). Exit codes
//! are scriptable: 0 success, 2 usage or configuration error, 3 solve
//! finished without converging (artifacts are still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tfdw",
    version,
    about = "Numerical laboratory for the TFDW variational problem"
)]
struct Cli {
    /// JSON run-configuration file; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key, as dotted.path=json (bare words
    /// count as strings). Repeatable, applied in order.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,

    /// Worker threads for sweep commands; above 1 requires a cold sweep
    /// (curve.cold = true).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Reuse per-point checkpoint files from an interrupted sweep.
    #[arg(long, global = true)]
    resume: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print and save the energy breakdown of a saved state.
    Energy {
        /// State file written by minimize (or by the library).
        state: PathBuf,
    },
    /// Minimize the energy at fixed mass; writes state, summary, trace.
    Minimize,
    /// Sweep the energy curve over the configured masses.
    Curve,
    /// Binding residuals between a potential curve and a free curve.
    Binding,
    /// Localization and radius diagnostics of a saved minimizer.
    Diagnose,
    /// Small-mass slopes against the optimized quotient limit.
    Asymptotics,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config::load(cli.config.as_deref(), &cli.set) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = match cli.command {
        Command::Energy { state } => commands::energy_cmd(&cfg, &state),
        Command::Minimize => commands::minimize_cmd(&cfg),
        Command::Curve => commands::curve_cmd(&cfg, cli.jobs, cli.resume),
        Command::Binding => commands::binding_cmd(&cfg),
        Command::Diagnose => commands::diagnose_cmd(&cfg),
        Command::Asymptotics => commands::asymptotics_cmd(&cfg),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
