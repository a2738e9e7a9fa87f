//! `kawasaki`: config-driven runs of the kernel checks, Monte Carlo,
//! hierarchy solvers and bounds.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kawasaki_core::Execution;

use crate::commands::{Context, Outcome};
use crate::config::{LoadedConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{sha256_hex, ConfigRecord, Manifest, OutputDir, Versions};

#[derive(Parser)]
#[command(
    name = "kawasaki",
    version,
    about = "Jump dynamics with attraction on a torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML, schema version 1).
    #[arg(long)]
    config: PathBuf,

    /// Output directory for CSV tables and `manifest.toml`.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,

    /// Suppress the summary on standard output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Commands {
    /// Stability analysis of the kernels and their constants.
    CheckKernels(Common),
    /// Kinetic Monte Carlo estimates of density and pair correlation.
    Simulate(Common),
    /// RK4 integration of the truncated hierarchy.
    Solve(Common),
    /// Picard iteration of the truncated hierarchy.
    Picard(Common),
    /// Existence horizons, operator norm bounds, ladders and majorants.
    Bounds(Common),
    /// Monte Carlo pair correlation against the hierarchy.
    Compare(Common),
}

impl Commands {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Commands::CheckKernels(c) => ("check-kernels", c),
            Commands::Simulate(c) => ("simulate", c),
            Commands::Solve(c) => ("solve", c),
            Commands::Picard(c) => ("picard", c),
            Commands::Bounds(c) => ("bounds", c),
            Commands::Compare(c) => ("compare", c),
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (name, common) = cli.command.parts();
    let execution = match common.threads {
        Some(0) => {
            return Err(CliError::config(
                Path::new("--threads"),
                None,
                "must be >= 1".into(),
            ));
        }
        Some(1) => Execution::Sequential,
        Some(n) => {
            // a second initialization in the same process is harmless
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
            Execution::Parallel
        }
        None => Execution::Parallel,
    };

    let cfg = LoadedConfig::load(&common.config)?;
    let out = OutputDir::create(&common.out)?;
    let mut ctx = Context {
        cfg,
        out,
        execution,
    };
    let outcome: Outcome = match &cli.command {
        Commands::CheckKernels(_) => commands::check_kernels(&mut ctx)?,
        Commands::Simulate(_) => commands::simulate(&mut ctx)?,
        Commands::Solve(_) => commands::solve(&mut ctx)?,
        Commands::Picard(_) => commands::picard(&mut ctx)?,
        Commands::Bounds(_) => commands::bounds(&mut ctx)?,
        Commands::Compare(_) => commands::compare(&mut ctx)?,
    };

    let threads = match execution {
        Execution::Sequential => 1,
        Execution::Parallel => rayon::current_num_threads(),
    };
    let manifest = Manifest {
        command: name.to_string(),
        status: outcome.status.clone(),
        exit_code: outcome.exit_code,
        seed: outcome.seed,
        execution: format!("{execution:?} ({threads} threads)").to_lowercase(),
        warnings: outcome.warnings.clone(),
        versions: Versions {
            kawasaki: env!("CARGO_PKG_VERSION").to_string(),
            kawasaki_core: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: ConfigRecord {
            path: ctx.cfg.path.display().to_string(),
            sha256: sha256_hex(ctx.cfg.text.as_bytes()),
            schema_version: SCHEMA_VERSION,
        },
        horizons: outcome.horizons,
        results: outcome.results,
        outputs: ctx.out.records.clone(),
        config_text: ctx.cfg.text.clone(),
    };
    let path = ctx.out.root.join("manifest.toml");
    std::fs::write(&path, manifest.to_toml()).map_err(|e| CliError::io(&path, e))?;

    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if !common.quiet {
        println!("status = {}", outcome.status);
        for line in &outcome.report {
            println!("{line}");
        }
        println!("manifest = {}", path.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
