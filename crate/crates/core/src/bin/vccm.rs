use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vccm_core::cli::{
    list_systems, resolve_output_dir, run, ExperimentConfig, RunMode, RunOptions, EXIT_ERROR, OUT_ENV,
};

/// VCCM synthesis, realization and LPV comparison experiments.
#[derive(Parser)]
#[command(name = "vccm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; the VCCM_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent simulations.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve (or load) a certificate and validate it.
    Synth(ExperimentArgs),
    /// Simulate the configured controllers.
    Simulate(ExperimentArgs),
    /// Simulate VCCM against the gain-scheduling baselines.
    Compare(ExperimentArgs),
    /// Validate a certificate on the dense grid.
    Validate(ExperimentArgs),
    /// Map closed-loop instability regions.
    Region(ExperimentArgs),
    /// Print the available systems.
    List {
        /// Directory of additional system JSON files.
        #[arg(long)]
        systems_dir: Option<PathBuf>,
    },
}

fn experiment(mode: RunMode, a: ExperimentArgs) -> Result<i32, String> {
    let cfg = ExperimentConfig::load(&a.config).map_err(|e| e.to_string())?;
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_output_dir(env.as_deref(), a.out.as_deref(), &cfg);
    let outcome = run(
        &cfg,
        &RunOptions {
            mode,
            out,
            workers: a.workers,
            seed: a.seed,
        },
    )
    .map_err(|e| e.to_string())?;
    let s = &outcome.summary;
    println!("{} {} -> {} ({:?})", mode.as_str(), s.system, outcome.out_dir.display(), s.status);
    if let Some(msg) = &s.synthesis_error {
        eprintln!("{msg}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => experiment(RunMode::Synth, a),
        Command::Simulate(a) => experiment(RunMode::Simulate, a),
        Command::Compare(a) => experiment(RunMode::Compare, a),
        Command::Validate(a) => experiment(RunMode::Validate, a),
        Command::Region(a) => experiment(RunMode::Region, a),
        Command::List { systems_dir } => list_systems(systems_dir.as_deref())
            .map(|entries| {
                for (name, description) in entries {
                    println!("{name:<24} {description}");
                }
                0
            })
            .map_err(|e| e.to_string()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
