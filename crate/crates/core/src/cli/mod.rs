//! Command-line runner: `compact6 <subcommand> --config <file> [--out <dir>]`.
//!
//! Exit codes: 0 when every verdict passes, 1 on divergence, numerical
//! failure or a failed verdict, 2 on configuration or usage errors.

pub mod config;
pub mod format;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, ExperimentKind, ModelConfig};
pub use run::{run_experiment, write_report, CliError, Report, Verdict};

#[derive(Debug, Parser)]
#[command(name = "compact6", version, about = "Compact6 experiments for Sobolev-type equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spatial or temporal convergence tables.
    Convergence(RunArgs),
    /// Fixed-step stability sweeps and the decay-envelope check.
    Stability(RunArgs),
    /// Conserved quantities and bore metrics over time.
    Invariants(RunArgs),
    /// Any experiment kind.
    Simulate(RunArgs),
    /// Amplification factors and the step bound, without time stepping.
    Analyze(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Convergence(a)
            | Command::Stability(a)
            | Command::Invariants(a)
            | Command::Simulate(a)
            | Command::Analyze(a) => a,
        }
    }

    fn accepts(&self, kind: ExperimentKind) -> bool {
        use ExperimentKind::*;
        match self {
            Command::Convergence(_) => matches!(kind, ConvergenceSpace | ConvergenceTime | Bbmb),
            Command::Stability(_) => matches!(kind, StabilitySweep | DecayCheck),
            Command::Invariants(_) => matches!(kind, Solitary | Interaction | Bore),
            Command::Simulate(_) | Command::Analyze(_) => true,
        }
    }
}

/// Loads the config, runs, writes outputs and returns the report.
pub fn execute(command: &Command) -> Result<Report, CliError> {
    let args = command.args();
    let cfg = parse_config(&args.config)?;
    if !command.accepts(cfg.experiment) {
        return Err(CliError::Usage(format!(
            "this subcommand does not run {} experiments; use `simulate`",
            cfg.experiment.name()
        )));
    }
    let report = match command {
        Command::Analyze(_) => run::run_analyze(&cfg)?,
        _ => run_experiment(&cfg)?,
    };
    let dir = output_dir(args.out.as_deref(), &cfg);
    write_report(&report, &dir)?;
    Ok(report)
}

fn output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for v in &report.verdicts {
                println!(
                    "{} {}: {} (target {})",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.check,
                    format::fmt_g(v.value, 6),
                    v.target
                );
            }
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
