//! Command-line front end for the experiment harness.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privbayes::harness::{run, ExperimentConfig, RunOutput, Task};
use privbayes::Error;

#[derive(Parser)]
#[command(name = "privbayes", version, about = "Robust and private Bayesian estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Private posterior-mean estimation of a Gaussian mean.
    SimulateMean(Common),
    /// Robust or private Bayesian linear regression.
    SimulateReg(Common),
    /// Streaming private posterior mean; prints one JSON line per batch.
    Stream(Common),
    /// Mixture distinguishing experiment and low-degree advantage bound.
    Hardness(Common),
    /// Sensitivity and probability-ratio audit of the grid mechanism.
    AuditDp(Common),
    /// Runs the configured sweep and prints fitted error exponents.
    Rates(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for results.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, task: Option<Task>) -> Result<ExperimentConfig, Error> {
    let mut c = match (&common.config, task) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(t)) => ExperimentConfig::for_task(t),
        (None, None) => {
            let mut c = ExperimentConfig::for_task(Task::Mean);
            c.grid.n = vec![500, 1000, 2000, 4000];
            c.grid.epsilon = vec![f64::INFINITY];
            c
        }
    };
    if let Some(t) = task {
        c.task = t;
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(t) = common.trials {
        c.trials = t;
    }
    c.validate()?;
    Ok(c)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute(cmd: &Command) -> Result<RunOutput, Error> {
    let (common, task) = match cmd {
        Command::SimulateMean(c) => (c, Some(Task::Mean)),
        Command::SimulateReg(c) => (c, Some(Task::Regression)),
        Command::Stream(c) => (c, Some(Task::Stream)),
        Command::Hardness(c) => (c, Some(Task::Hardness)),
        Command::AuditDp(c) => (c, Some(Task::Audit)),
        Command::Rates(c) => (c, None),
    };
    let config = load(common, task)?;
    let out = run(&config)?;
    if let Some(dir) = &common.out {
        out.write(dir)?;
    }
    match cmd {
        Command::Stream(_) if common.out.is_none() => {
            for rec in out.streams.first().into_iter().flatten() {
                emit(&rec.to_json_line()?);
            }
        }
        Command::Rates(_) => {
            emit("d\teta\tepsilon\tbeta\tsigma2\texponent\tse\tpoints");
            for g in &out.report.fits {
                emit(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{}",
                    g.d, g.eta, g.epsilon, g.beta, g.sigma2, g.fit.exponent, g.fit.exponent_se, g.fit.points
                ));
            }
        }
        _ if common.out.is_none() => emit(&serde_json::to_string_pretty(&out.report)?),
        _ => {}
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(out) if out.report.infeasible() > 0 => {
            eprintln!("{} trial(s) were infeasible", out.report.infeasible());
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasible() { 2 } else { 1 })
        }
    }
}
