use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bdlab::config::parse_config;
use bdlab::runner::{
    cmd_regsweep, cmd_run, cmd_sweep, cmd_verify, load_config, RunnerOptions, DEFAULT_CONFIG,
};

/// Brinkman/Darcy tissue-growth simulations and convergence studies.
#[derive(Parser)]
#[command(name = "bdlab", version)]
struct Cli {
    /// Maximum number of concurrent sweep members (1 = sequential).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides BDLAB_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG log-log plots.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation: trajectory, energy ledger and a priori monitor.
    Run { config: PathBuf },
    /// Sigma sweep against the Darcy reference.
    Sweep { config: PathBuf },
    /// Regularized-scheme consistency table over (eps, delta).
    Regsweep { config: PathBuf },
    /// Built-in acceptance suite; exit status 0 iff every criterion passes.
    Verify { config: Option<PathBuf> },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunnerOptions {
        jobs: cli.jobs,
        out: cli.out,
        plots: cli.plots,
    };
    match execute(cli.command, &opts) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command, opts: &RunnerOptions) -> bdlab::Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let s = cmd_run(&load_config(&config)?, opts)?;
            println!(
                "{} steps, max p {:.6}, max |R| {:.3e}; outputs in {}",
                s.steps,
                s.max_pressure,
                s.max_abs_residual,
                s.dir.display()
            );
        }
        Command::Sweep { config } => {
            let report = cmd_sweep(&load_config(&config)?, opts)?;
            println!("{}", report.csv_header());
            for row in report.csv_rows() {
                println!("{row}");
            }
        }
        Command::Regsweep { config } => {
            let (joint, delta_first) = cmd_regsweep(&load_config(&config)?, opts)?;
            println!("{}", bdlab::regularized::ConsistencyRow::CSV_HEADER);
            for row in joint.iter().chain(&delta_first) {
                println!("{}", row.csv());
            }
        }
        Command::Verify { config } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => parse_config(DEFAULT_CONFIG)?,
            };
            let report = cmd_verify(&cfg, opts)?;
            for o in &report.outcomes {
                println!("{}", o.line());
            }
            if report.passed() {
                println!("all criteria passed; outputs in {}", report.dir.display());
            } else {
                let ids: Vec<String> = report.failures().iter().map(|i| i.to_string()).collect();
                eprintln!("FAILED criteria: {}", ids.join(","));
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
