use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradflow::cli::{self, CliOptions, Command};

#[derive(Parser)]
#[command(name = "gradflow", version, about = "Semilinear gradient-flow laboratory")]
struct Args {
    #[command(subcommand)]
    command: Sub,
    /// Write outputs here instead of the config's `output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Suppress progress messages on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the flow and write diagnostics, snapshots and a run summary.
    Simulate { config: PathBuf },
    /// Build the equilibrium catalog.
    Equilibria { config: PathBuf },
    /// Run the launch plan and write the connection summary.
    Connect { config: PathBuf },
    /// Run the built-in verification suites.
    Verify { config: PathBuf },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, path) = match args.command {
        Sub::Simulate { config } => (Command::Simulate, config),
        Sub::Equilibria { config } => (Command::Equilibria, config),
        Sub::Connect { config } => (Command::Connect, config),
        Sub::Verify { config } => (Command::Verify, config),
    };
    let opts = CliOptions { output_dir: args.output_dir, quiet: args.quiet };
    ExitCode::from(cli::execute(command, &path, &opts).code() as u8)
}
