//! `wcsgd`: run experiment configs and Monte-Carlo validation checks.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 a gating check
//! or validation failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use wcsgd_core::harness::{
    list_presets, preset_text, run_experiment, run_validation, ValidationCheck,
};
use wcsgd_core::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "wcsgd",
    about = "Stochastic subgradient experiments under heavy-tailed noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its outputs.
    Run {
        /// Config file (`key = value` lines).
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset name instead of a config file.
        #[arg(long)]
        preset: Option<String>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in presets, or print one.
    Presets {
        /// Print the config text of this preset.
        name: Option<String>,
    },
    /// Run one Monte-Carlo or pathwise validation check.
    Validate {
        #[arg(long, value_parser = ["lemma1", "clip", "batch-moment"])]
        check: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the version.
    Version,
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn load(config: Option<&Path>, preset: Option<&str>) -> anyhow::Result<ExperimentConfig> {
    Ok(match (config, preset) {
        (Some(path), _) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => ExperimentConfig::preset(name, Path::new("."))?,
        (None, None) => anyhow::bail!("either --config or --preset is required"),
    })
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Run {
            config,
            preset,
            jobs,
            out,
        } => {
            let mut cfg = load(config.as_deref(), preset.as_deref())?;
            if let Some(out) = out {
                cfg.out = out;
            }
            let report = run_experiment(&cfg, jobs)?;
            print!("{}", report.summary_text());
            println!("outputs written to {}", cfg.out.display());
            Ok(if report.pass() {
                Outcome::Ok
            } else {
                Outcome::ChecksFailed
            })
        }
        Command::Presets { name: None } => {
            for n in list_presets() {
                println!("{n}");
            }
            Ok(Outcome::Ok)
        }
        Command::Presets { name: Some(n) } => {
            let text =
                preset_text(&n).ok_or_else(|| wcsgd_core::Error::UnknownPreset(n.clone()))?;
            print!("{}", text.trim_start());
            Ok(Outcome::Ok)
        }
        Command::Validate {
            check,
            config,
            jobs,
        } => {
            let cfg = load(Some(&config), None)?;
            let (report, path) = run_validation(&cfg, ValidationCheck::parse(&check)?, jobs)?;
            print!("{}", report.to_text());
            println!("report written to {}", path.display());
            Ok(if report.pass() {
                Outcome::Ok
            } else {
                Outcome::ChecksFailed
            })
        }
        Command::Version => {
            println!("wcsgd {}", env!("CARGO_PKG_VERSION"));
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
