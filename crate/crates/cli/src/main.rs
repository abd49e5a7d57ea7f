//! `mrfuse`: synthesize data, run coupled and baseline factorizations, and score
//! the results.
//!
//! Flag values override the config file, which overrides built-in defaults. Commands
//! that read a data directory start from the config stored in its manifest unless
//! `--config` is given.

mod commands;
mod config;
mod data;
mod eval;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "mrfuse", version, about = "Multi-resolution beta-NMF experiments")]
struct Cli {
    /// Worker threads for parallel trials (0 = one per core).
    #[arg(long, global = true, env = "MRFUSE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated β values, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            betas: self.beta.clone(),
            seed: self.seed,
            trials: self.trials,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate observations, operators and references into a data directory.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Run the coupled solver for every β and trial and score each run.
    Fuse {
        /// Directory written by `synth`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run single-observation β-NMF on X alone and on Y alone.
    Baseline {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint against the reference and write the SAM map.
    Eval {
        /// Checkpoint directory.
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a coupled audio estimate with the single-observation baselines.
    AudioReport {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .context("starting worker threads")?;
    pool.install(|| match cli.command {
        Command::Synth { common } => commands::synth(common.config.as_deref(), &common.overrides()).map(drop),
        Command::Fuse { data, common } => {
            commands::fuse(&data, common.config.as_deref(), &common.overrides()).map(drop)
        }
        Command::Baseline { data, common } => {
            commands::baseline(&data, common.config.as_deref(), &common.overrides()).map(drop)
        }
        Command::Eval { estimate, data, out } => commands::eval(&estimate, &data, out.as_deref()).map(drop),
        Command::AudioReport {
            data,
            estimate,
            seed,
            trials,
            out,
        } => {
            let o = Overrides {
                seed,
                trials,
                out,
                ..Overrides::default()
            };
            commands::audio_report(&data, &estimate, &o).map(drop)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
