//! `hsitd`: batch frontend for decomposition-based target detection.
//!
//! Exit codes: 0 success, 1 usage or config, 2 solver stopped at its
//! iteration cap, 3 I/O, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, PipelineConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "hsitd", version, about = "Low-rank + group-sparse hyperspectral target detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the cube into low-rank background and target components.
    Decompose(Common),
    /// Implant targets into a background at every configured fill fraction.
    Implant(Common),
    /// Score pixels with the configured detection strategies.
    Detect(Common),
    /// ROC curves and AUC for every map in the output directory.
    Evaluate(Common),
    /// Every stage in order.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Weight preset: synthetic-s1, real-s1, synthetic-s2 or real-s2.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the detector sweep (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, stage): (&Common, fn(&PipelineConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Decompose(c) => (c, commands::cmd_decompose),
        Command::Implant(c) => (c, commands::cmd_implant),
        Command::Detect(c) => (c, commands::cmd_detect),
        Command::Evaluate(c) => (c, commands::cmd_evaluate),
        Command::Pipeline(c) => (c, commands::cmd_pipeline),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let overrides = Overrides {
        profile: common.profile.clone(),
        seed: common.seed,
        out_dir: common.out_dir.clone(),
    };
    let cfg = PipelineConfig::load(&common.config, &overrides)?;
    commands::write_resolved_config(&cfg, &cfg.out_dir())?;
    stage(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
