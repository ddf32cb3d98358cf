use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use aocsi::RewardMode;
use aocsi_cli::experiments::{self, apply_overrides};
use aocsi_cli::validate::validate;
use aocsi_cli::ExperimentConfig;
use clap::{Parser, Subcommand};
use serde::Serialize;

/// Pilot scheduling experiments on an aged-CSI fading link.
#[derive(Debug, Parser)]
#[command(name = "aocsi", version)]
struct Cli {
    /// Experiment config (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// How data slots are scored in simulation.
    #[arg(long, global = true, value_parser = ["expected", "realized"])]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the expected goodput r(age) for ages 1..=delta_max.
    GoodputCurve,
    /// Solve for the optimal threshold and cross-check it.
    Solve,
    /// Threshold vs periodic pilots across the SNR grid.
    SweepSnr,
    /// Threshold vs periodic pilots across the speed grid.
    SweepMobility,
    /// Simulate both policies at the configured point.
    Simulate,
    /// Run the numerical and optimality checks.
    Validate,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mode = cli.mode.as_deref().map(str::parse::<RewardMode>).transpose()?;
    apply_overrides(&mut config, cli.seed, mode);
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    experiments::ensure_horizon(&config)?;
    let out = config.out_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::GoodputCurve => {
            let curve = experiments::goodput_curve(&config)?;
            let path = out.join("goodput_curve.csv");
            curve.write_csv(create(&path)?)?;
            println!("wrote {} ages to {}", curve.len(), path.display());
        }
        Command::Solve => {
            let report = experiments::solve(&config)?;
            let path = out.join("solve.json");
            write_json(&path, &report)?;
            println!(
                "beta {:.9}, period {}, brute force {:.2e}, value iteration {:.2e} -> {}",
                report.beta,
                report.period,
                report.brute_force_deviation,
                report.value_iteration_deviation,
                path.display()
            );
            if !report.agree {
                eprintln!("solver disagrees with an oracle by more than {}", report.tolerance);
                return Ok(ExitCode::from(2));
            }
        }
        Command::SweepSnr => {
            let rows = experiments::sweep_snr(&config)?;
            let path = out.join("sweep_snr.csv");
            experiments::write_snr_csv(&rows, create(&path)?)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::SweepMobility => {
            let rows = experiments::sweep_mobility(&config)?;
            let path = out.join("sweep_mobility.csv");
            experiments::write_mobility_csv(&rows, create(&path)?)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Simulate => {
            let report = experiments::simulate(&config)?;
            let path = out.join("simulate.json");
            write_json(&path, &report)?;
            for r in &report.results {
                println!(
                    "seed {} {:<12} avg goodput {:.5} pilot fraction {:.4}",
                    r.seed, r.policy, r.avg_goodput, r.pilot_fraction
                );
            }
            println!("beta {:.6}, period {} -> {}", report.solution.beta, report.solution.period, path.display());
        }
        Command::Validate => {
            let report = validate(&config)?;
            let path = out.join("validate.json");
            write_json(&path, &report)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
