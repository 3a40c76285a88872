//! `odernn-lab`: command-line driver for the ODERNN toolkit.
//!
//! Every subcommand writes its reports into `--out` together with a
//! `run_manifest.json` that records the arguments and seed together with a SHA-256 of each
//! input and output file.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::TableFormat;

pub const THREADS_ENV: &str = "ODERNN_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "odernn-lab",
    version,
    about = "ODE-integrator recurrent networks: stability, reductions, QUNN and clock Hamiltonians"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Burrage–Butcher certificate plus a twin-trajectory perturbation probe.
    Stability(commands::StabilityArgs),
    /// Map an LSTM/GRU/URNN/CW-RNN spec to an ODERNN and check equivalence.
    Map(commands::MapArgs),
    /// Compare the ODERNN integrator mode with a direct Runge–Kutta solve.
    Integrate(commands::IntegrateArgs),
    /// Finite-difference SGD on a synthetic sequence task.
    Train(commands::TrainArgs),
    /// Build a clock Hamiltonian and verify its ground space.
    Clockham(commands::ClockhamArgs),
    /// Run a QUNN and audit its structure and parameter scaling.
    QunnDemo(commands::QunnDemoArgs),
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// The invocation minus `--out`, so a manifest can be replayed into any directory.
fn recorded_args() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--out" {
            args.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let args = recorded_args();
    let result = match &cli.command {
        Command::Stability(a) => commands::stability(&cli.common, a, &args),
        Command::Map(a) => commands::map(&cli.common, a, &args),
        Command::Integrate(a) => commands::integrate(&cli.common, a, &args),
        Command::Train(a) => commands::train(&cli.common, a, &args),
        Command::Clockham(a) => commands::clockham(&cli.common, a, &args),
        Command::QunnDemo(a) => commands::qunn_demo(&cli.common, a, &args),
    };
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", cli.common.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
