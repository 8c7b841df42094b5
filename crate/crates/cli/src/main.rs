//! `sep` — command-line driver for the exclusion-process toolkit.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags, bad
//! config file, failed validation), 3 for runtime failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sep_core::experiments::{
    run_experiment, run_kmc_dump, run_pde_only, ExperimentConfig, ExperimentKind, RunReport,
};

#[derive(Parser)]
#[command(
    name = "sep",
    version,
    about = "Kinetic Monte Carlo and cross-diffusion solvers for two-species exclusion dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; omitted fields fall back to the preset defaults.
    #[arg(long, global = true, value_name = "path")]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long, global = true, value_name = "u64")]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, global = true, value_name = "dir")]
    out: Option<PathBuf>,
    /// Worker threads for realization batches (default: all cores).
    #[arg(long, global = true, value_name = "n")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Transport constants and the lattice kernel table.
    Coefficients,
    /// Stochastic lattice runs, dumping each recorded configuration.
    Kmc,
    /// Continuum solves, dumping per-snapshot density fields.
    Pde,
    /// A full preset campaign: stochastic runs, continuum solves, estimators.
    Experiment {
        /// Preset name, e.g. selfdiff_sweep_equal or profile_comparison_equal.
        preset: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} worker threads: {e}");
            return 3;
        }
    }

    let text = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return 2;
            }
        },
        None => "{}".to_string(),
    };

    let parsed = match &cli.command {
        Command::Coefficients => {
            ExperimentConfig::parse_str_with_kind(&text, ExperimentKind::CoefficientsReport)
        }
        Command::Kmc | Command::Pde => {
            // These run on any experiment's config; default to `custom` only
            // when the file does not name a kind itself.
            let named = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .is_some_and(|v| v.get("experiment").is_some());
            if named {
                ExperimentConfig::parse_str(&text)
            } else {
                ExperimentConfig::parse_str_with_kind(&text, ExperimentKind::Custom)
            }
        }
        Command::Experiment { preset } => match ExperimentKind::from_name(preset) {
            Some(kind) => ExperimentConfig::parse_str_with_kind(&text, kind),
            None => {
                eprintln!(
                    "error: unknown preset '{preset}'; expected one of: {}",
                    ExperimentKind::ALL.map(|k| k.name()).join(", ")
                );
                return 2;
            }
        },
    };
    let mut cfg = match parsed {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }

    let result = match &cli.command {
        Command::Coefficients | Command::Experiment { .. } => run_experiment(&cfg),
        Command::Kmc => run_kmc_dump(&cfg),
        Command::Pde => run_pde_only(&cfg),
    };
    match result {
        Ok(report) => {
            print_report(&report);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_report(report: &RunReport) {
    println!(
        "wrote {} files to {} in {:.2} s",
        report.files.len() + 1, // plus the manifest
        report.out_dir.display(),
        report.wall_seconds
    );
}
