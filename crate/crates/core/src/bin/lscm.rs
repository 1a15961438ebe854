use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lscm::cli_io::{run, Command, RunOptions};
use lscm::evaluation::SweepVar;
use lscm::solvers::SolverKind;

#[derive(Parser)]
#[command(name = "lscm", version, about = "Angular power spectrum recovery from multi-beam RSRP")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Restricts the run to one solver.
    #[arg(long, global = true, value_parser = parse_solver)]
    solver: Option<SolverKind>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the coefficient matrix, its column norms and the codebook.
    BuildMatrix,
    /// Simulate RSRP samples for a random sparse ground truth.
    Simulate,
    /// Recover the angular spectrum of every grid in a measurement file.
    Solve {
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Support-recovery accuracy sweep over N, M or K.
    Sweep {
        #[arg(long, value_parser = parse_var)]
        var: Option<SweepVar>,
        /// Comma-separated sweep values, e.g. 8,16,24,32.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Rotation prediction MAE on synthetic grids.
    RotateEval,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: lscm::LscmError| e.to_string())
}

fn parse_var(s: &str) -> Result<SweepVar, String> {
    s.parse().map_err(|e: lscm::LscmError| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut opts = RunOptions {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        solver: cli.solver,
        ..Default::default()
    };
    let command = match cli.command {
        Cmd::BuildMatrix => Command::BuildMatrix,
        Cmd::Simulate => Command::Simulate,
        Cmd::Solve { measurements } => {
            opts.measurements = Some(measurements);
            Command::Solve
        }
        Cmd::Sweep { var, values } => {
            opts.var = var;
            opts.values = values;
            Command::Sweep
        }
        Cmd::RotateEval => Command::RotateEval,
    };
    match run(command, &opts) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
