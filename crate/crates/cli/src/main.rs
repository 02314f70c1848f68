//! `tikflow`: simulate, sweep, trace viscosity curves and run the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod overrides;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit code for configuration and validation errors.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit code for integration and solver failures.
pub const EXIT_NUMERICAL: u8 = 2;
/// Exit code when an acceptance criterion fails.
pub const EXIT_ACCEPTANCE: u8 = 3;

const OVERRIDE_HELP: &str = "Any config key can be overridden on the command line as \
`--section.key value` or `--section.key=value`, e.g. `--dynamics.alpha 3.5`.";

#[derive(Parser, Debug)]
#[command(name = "tikflow", version, about, after_help = OVERRIDE_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configured system and write its trajectory as CSV.
    Simulate(commands::SimulateArgs),
    /// Repeat a run over a grid of alpha, delta or r and tabulate fitted slopes.
    Sweep(commands::SweepArgs),
    /// Tabulate viscosity points x_eps of the configured problem.
    Viscosity(commands::ViscosityArgs),
    /// Run the acceptance suite.
    Verify(commands::VerifyArgs),
}

fn main() -> ExitCode {
    let (args, overrides) = match overrides::split_args(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &overrides),
        Command::Sweep(a) => commands::sweep(&a, &overrides),
        Command::Viscosity(a) => commands::viscosity(&a, &overrides),
        Command::Verify(a) => commands::verify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
