use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "commons-sim", version, about = "Agents solving a shared knapsack while depleting shared reserves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a preset scenario as JSON.
    Preset {
        /// optimal, satisficing or accelerated
        name: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Solve an instance file exactly.
    Solve {
        instance: PathBuf,
        /// Require the dynamic-programming solver; never fall back to enumeration.
        #[arg(long)]
        exact_only: bool,
    },
    /// Run a scenario and write CSV, summary and manifest files.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run once per seed, e.g. `1..50` (inclusive) or `3,5,8`.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Sweep uniform satisfaction levels over several seeds.
    Sweep {
        /// Comma-separated levels in (0, 1].
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "1..30")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute entropy, utility and divide metrics for a finished run.
    Report {
        run_dir: PathBuf,
        /// Output directory (default: <run_dir>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random instance.
    GenInstance {
        #[arg(long)]
        items: usize,
        #[arg(long)]
        seed: u64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Preset { name, seed } => commands::preset(&name, seed),
        Command::Solve { instance, exact_only } => commands::solve(&instance, exact_only),
        Command::Simulate { scenario, out, seed, seeds } => commands::simulate(&scenario, &out, seed, seeds.as_deref()),
        Command::Sweep { levels, scenario, seeds, out } => commands::sweep(&levels, &scenario, &seeds, &out),
        Command::Report { run_dir, out } => commands::report(&run_dir, out.as_deref()),
        Command::GenInstance { items, seed, out } => commands::gen_instance(items, seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<commons_core::Error>() {
                Some(commons_core::Error::Unsupported(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
