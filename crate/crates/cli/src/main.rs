mod config;
mod experiments;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::SchemaError;
use experiments::{RunError, CATALOG};
use report::Context;

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(name = "riqs", version, about = "Experiments on repeated interaction quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiplies every tolerance; overrides `tol_scale` in the config.
        #[arg(long = "tol-scale")]
        tol_scale: Option<f64>,
    },
    /// Print the experiment catalog.
    List,
}

fn schema_exit(e: &SchemaError) -> ExitCode {
    eprintln!("error: invalid config {e}");
    ExitCode::from(2)
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, tol_scale: Option<f64>) -> ExitCode {
    let cfg = match config::load(&config) {
        Ok(c) => c,
        Err(e) => return schema_exit(&e),
    };
    let Some(entry) = experiments::find(&cfg.experiment) else {
        let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
        return schema_exit(&SchemaError::new("experiment", format!("unknown experiment `{}`, expected one of {}", cfg.experiment, names.join(", "))));
    };
    let tol_scale = tol_scale.or(cfg.tol_scale).unwrap_or(1.0);
    if !(tol_scale.is_finite() && tol_scale > 0.0) {
        return schema_exit(&SchemaError::new("--tol-scale", "must be a positive number"));
    }
    let ctx = Context { seed: seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), tol_scale };
    let dir = out.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("out").join(entry.name));

    let report = match experiments::run(entry, &cfg.params, &ctx) {
        Ok(r) => r,
        Err(RunError::Schema(e)) => return schema_exit(&e),
        Err(e @ RunError::Compute(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = report::write_outputs(&dir, entry.name, &ctx, &report) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status}  {}: {:.3e} {} {:.3e}", c.name, c.measured, c.relation.symbol(), c.bound);
    }
    for (k, v) in &report.quantities {
        println!("      {k} = {v:.6e}");
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!("{}: {} checks, {failed} failed; results in {}", entry.name, report.checks.len(), dir.display());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for e in &CATALOG {
                println!("{:<22} {}", e.name, e.summary);
                println!("{:<22} anchor: {}", "", e.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out, tol_scale } => run(config, seed, out, tol_scale),
    }
}
