use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spt_core::experiments::{describe_files, run_experiment, BackendChoice, ExperimentKind, LoadedConfig, RunContext};
use spt_core::SptError;

#[derive(Parser)]
#[command(name = "spt", version, about = "Finite-chain SPT experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Index,
    StringOrder,
    MeasureSweep,
    Decay,
    Localize,
    /// Every experiment listed in the config, or all of them.
    All,
}

fn exit_code(err: &SptError) -> u8 {
    match err.root() {
        SptError::Config { .. } => 2,
        SptError::Assertion(_) => 3,
        _ => 1,
    }
}

fn context(cli: &Cli) -> Result<RunContext, SptError> {
    let path = cli.config.as_ref().ok_or_else(|| SptError::Config {
        path: "--config".into(),
        message: "a config file is required".into(),
    })?;
    let mut ctx = RunContext::new(LoadedConfig::from_path(path, cli.backend)?);
    if let Some(seed) = cli.seed {
        ctx = ctx.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        ctx = ctx.with_out_dir(out);
    }
    Ok(ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match context(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let kinds = match cli.command {
        Command::Index => vec![ExperimentKind::Index],
        Command::StringOrder => vec![ExperimentKind::StringOrder],
        Command::MeasureSweep => vec![ExperimentKind::MeasureSweep],
        Command::Decay => vec![ExperimentKind::Decay],
        Command::Localize => vec![ExperimentKind::Localize],
        Command::All => ctx.config.experiment_list(),
    };
    let mut code = 0u8;
    for kind in kinds {
        match run_experiment(&ctx, kind) {
            Ok(files) => print!("{}", describe_files(&files)),
            Err(e) => {
                eprintln!("error: {e}");
                if code == 0 {
                    code = exit_code(&e);
                }
            }
        }
    }
    ExitCode::from(code)
}
