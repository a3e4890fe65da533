use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use composite::experiment::{run, validate, Command, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "Exact evaluation of composite estimators under a 4-8-4 rotation design")]
struct Cli {
    /// TOML experiment config; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    months: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate the population variants and their monthly summary.
    GeneratePopulation,
    /// Write the rotation chart and check inclusion counts and overlaps.
    AuditDesign,
    /// Exact moments of the fixed estimators.
    Evaluate,
    /// Best AK coefficients and best regression composite α.
    Optimize,
    /// Everything: populations, design audit, all estimators and tables.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.out = o;
    }
    if let Some(m) = cli.months {
        config.months = m;
    }
    if let Some(p) = cli.parallel {
        config.parallel = p;
    }
    let problems = validate(&config);
    if !problems.is_empty() {
        for p in problems {
            eprintln!("error: {p}");
        }
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Sub::GeneratePopulation => Command::GeneratePopulation,
        Sub::AuditDesign => Command::AuditDesign,
        Sub::Evaluate => Command::Evaluate,
        Sub::Optimize => Command::Optimize,
        Sub::Report => Command::Report,
    };
    match run(&config, command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
