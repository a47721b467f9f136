use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sdwave::{parse_config, run, RunConfig};

#[derive(Parser)]
#[command(name = "sdwave", version, about = "Spectral-Galerkin experiments for the strongly damped wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Seed (overrides the config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 gives serial execution.
        #[arg(long, env = "SDWAVE_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: ok ({})", config.display(), cfg.experiment.name());
            Ok(true)
        }
        Command::Run { config, output, seed, threads } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(dir) = &output {
                cfg.output.directory = dir.to_string_lossy().into_owned();
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
            }
            let dir = PathBuf::from(&cfg.output.directory);
            let manifest = run(&cfg, &dir)?;
            for v in &manifest.verdicts {
                println!("{:<28} {:?}  {}", v.name, v.status, v.detail);
            }
            println!("manifest: {}", dir.join("manifest.json").display());
            Ok(manifest.passed)
        }
    }
}
