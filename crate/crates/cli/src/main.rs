use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loewner::commands::{
    cmd_bench, cmd_extract, cmd_forward, cmd_kappa, cmd_trace, BenchConfig, ExtractConfig, ForwardConfig, KappaConfig,
    TraceConfig,
};

/// Chordal Loewner evolution: traces from driving functions, driving
/// functions from curves, and SLE ensemble statistics.
///
/// Every flag can also be set through an environment variable named
/// `LOEWNER_` followed by the flag in upper case (for example
/// `LOEWNER_KAPPA`, `LOEWNER_GATE_L`).
///
/// Exit codes: 0 success, 2 invalid input, 3 refinement cap or failed
/// convergence, 1 anything else.
#[derive(Parser)]
#[command(name = "loewner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adaptive SLE(kappa) trace with consecutive points within eps.
    Trace(TraceConfig),
    /// Trace of a driving function read from CSV.
    Forward(ForwardConfig),
    /// Driving function of a curve read from CSV.
    Extract(ExtractConfig),
    /// Estimate kappa from an ensemble of traces.
    Kappa(KappaConfig),
    /// Time the naive and blocked solvers and fit cost exponents.
    Bench(BenchConfig),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Trace(c) => cmd_trace(c),
        Command::Forward(c) => cmd_forward(c),
        Command::Extract(c) => cmd_extract(c),
        Command::Kappa(c) => cmd_kappa(c),
        Command::Bench(c) => cmd_bench(c),
    };
    match result {
        Ok(meta) => {
            // a closed pipe downstream is not a failure of the run
            let text = serde_json::to_string_pretty(&meta).expect("meta is valid json");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("loewner: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
