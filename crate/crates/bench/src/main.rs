//! Command-line entry point: `run` plays the experiment matrix, `summarize`
//! prints the table of a results file.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irpft::Planner;
use irpft_bench::{run_matrix, summarize, ExperimentConfig, Results};

#[derive(Debug, Parser)]
#[command(name = "irpft-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment matrix and write a results file.
    Run {
        /// TOML configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results.jsonl")]
        out: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run a single planner (pft or irpft).
        #[arg(long)]
        planner: Option<Planner>,
        /// Override the number of episodes per cell.
        #[arg(long)]
        episodes: Option<u32>,
    },
    /// Print per-cell means, 95% intervals and speedups of a results file.
    Summarize {
        /// Results file written by `run`.
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            planner,
            episodes,
        } => run(config, out, seed, planner, episodes),
        Command::Summarize { path } => File::open(&path)
            .map_err(irpft_bench::BenchError::from)
            .and_then(|f| Results::read(BufReader::new(f)))
            .and_then(|r| summarize(&r))
            .map(|table| print!("{table}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    planner: Option<Planner>,
    episodes: Option<u32>,
) -> irpft_bench::Result<()> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(&path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.experiment.seed = seed;
    }
    if let Some(p) = planner {
        cfg.experiment.planners = vec![p];
    }
    if let Some(k) = episodes {
        cfg.experiment.episodes = k;
    }
    cfg.validate()?;
    let mut writer = BufWriter::new(File::create(&out)?);
    let results = run_matrix(&cfg, &mut writer, |row| {
        eprintln!(
            "{:<6} m={:<3} episode {:<3} steps {:<3} reward {:>9.3} plan {:>8.3} ms",
            row.planner.name(),
            row.particles,
            row.episode,
            row.steps,
            row.total_reward,
            row.mean_plan_ms
        );
    })?;
    eprintln!("wrote {}", out.display());
    print!("{}", summarize(&results)?);
    Ok(())
}
