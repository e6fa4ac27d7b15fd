use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use preacc_cli::{cmd_bench, cmd_race_demo, cmd_verify, SweepConfig, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "preacc",
    version,
    about = "Simultaneous preaccumulation with local adjoints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the correctness checks and print a pass/fail table.
    Verify {
        /// Sweep config or workload spec (JSON); built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        disable_lhs_reset: bool,
    },
    /// Benchmark every strategy at every worker count and write a CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; defaults to the config's output_path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay two regions sharing an input on shared and local adjoints.
    RaceDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// List every interleaving instead of one seeded schedule.
        #[arg(long)]
        enumerate: bool,
    },
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match run(cli) {
        // output piped into `head` and friends
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            Ok(ExitCode::SUCCESS)
        }
        other => other,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Verify {
            config,
            disable_lhs_reset,
        } => {
            let config = match config {
                Some(path) => SweepConfig::load(&path)?,
                None => SweepConfig::default(),
            };
            let options = VerifyOptions { disable_lhs_reset };
            let passed = cmd_verify(&config, options, &mut stdout)?;
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Bench { config, out } => {
            let config = SweepConfig::load(&config)?;
            let out = out
                .or_else(|| config.output_path.clone())
                .context("no output path: pass --out or set output_path in the config")?;
            let rows = cmd_bench(&config, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::RaceDemo { seed, enumerate } => {
            cmd_race_demo(seed, enumerate, &mut stdout)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
