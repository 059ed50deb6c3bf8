//! `qmoney`: security sweeps, tables, certificates, lifetimes and honest
//! protocol simulation for coherent-state quantum credit cards.
//!
//! Exit status: 0 success, 1 usage error, 2 some points failed to solve,
//! 3 internal error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmoney_core::Scenario;

use config::{Command, Format, Job, JobConfig, Task, UsageError};

#[derive(Parser, Debug)]
#[command(name = "qmoney", version, about = "Security analysis of coherent-state quantum credit cards")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Both security SDPs at a single parameter point.
    Solve(Flags),
    /// Security SDPs over a grid of μ, e and η_d.
    Sweep(Flags),
    /// Optimal error for both terminal models on the 15 reference rows.
    Table3(Flags),
    /// Dual certificates for parallel repetition (default: 6 × 6 grid).
    Certify(Flags),
    /// Secure card lifetime under a decohering memory.
    Lifetime(Flags),
    /// Monte Carlo run of the honest protocol.
    Simulate(Flags),
    /// Runs the command named in a config file.
    Run {
        /// TOML config file naming the command.
        file: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    scenario: Option<Vec<Scenario>>,
    /// Phase-randomized mint states (true, false, or both as "false,true").
    #[arg(long, value_delimiter = ',', num_args = 0..=1, default_missing_value = "true")]
    randomized: Option<Vec<bool>>,
    /// Mean photon numbers.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Option<Vec<f64>>,
    /// Card-1 error rates.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    e: Option<Vec<f64>>,
    /// Detector efficiencies.
    #[arg(long = "eta-d", value_delimiter = ',', allow_negative_numbers = true)]
    eta_d: Option<Vec<f64>>,
    /// Storage times in μs (lifetime curves).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
    /// Number of positions analyzed jointly (solve only).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Initial memory retrieval efficiency.
    #[arg(long = "eta-m0")]
    eta_m0: Option<f64>,
    /// Memory dephasing time in μs.
    #[arg(long)]
    tau: Option<f64>,
    /// Card length for simulate.
    #[arg(long)]
    positions: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// No-click window half-width in standard deviations.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Enable slow analyses.
    #[arg(long)]
    slow: bool,
    /// Omit the generation timestamp.
    #[arg(long)]
    no_timestamp: bool,
}

impl Flags {
    fn into_config(self, command: Option<Command>) -> anyhow::Result<JobConfig> {
        let file = match &self.config {
            Some(p) => JobConfig::load(p)?,
            None => JobConfig::default(),
        };
        let flags = JobConfig {
            command,
            scenario: self.scenario,
            phase_randomized: self.randomized,
            mu: self.mu,
            e: self.e,
            eta_d: self.eta_d,
            t: self.t,
            n: self.n,
            task: self.task,
            eta_m0: self.eta_m0,
            tau: self.tau,
            positions: self.positions,
            trials: self.trials,
            kappa: self.kappa,
            output: self.output,
            format: self.format,
            seed: self.seed,
            workers: self.workers,
            slow: self.slow.then_some(true),
            no_timestamp: self.no_timestamp.then_some(true),
        };
        Ok(file.overlay(flags))
    }
}

fn job_config(cli: Cli) -> anyhow::Result<JobConfig> {
    let (command, flags) = match cli.command {
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Table3(f) => (Command::Table3, f),
        Sub::Certify(f) => (Command::Certify, f),
        Sub::Lifetime(f) => (Command::Lifetime, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Run { file, flags } => {
            let base = JobConfig::load(&file)?;
            return Ok(base.overlay(flags.into_config(None)?));
        }
    };
    flags.into_config(Some(command))
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    let job = Job::resolve(job_config(cli)?)?;
    log::info!("running {} with {} workers", job.command, job.workers);
    let outcome = commands::run(&job)?;
    let stamp = job.timestamp.then(output::timestamp);
    let bytes = outcome.table.render(job.format, stamp.as_deref())?;
    output::emit(&bytes, job.output.as_deref())?;
    if let Some(summary) = outcome.summary {
        if job.output.is_some() {
            print!("{summary}");
        } else {
            eprint!("{summary}");
        }
    }
    if outcome.failures > 0 {
        eprintln!("{} point(s) failed to solve; see the failure column", outcome.failures);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) if err.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
