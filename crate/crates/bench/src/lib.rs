//! Benchmark runner: IR-PFT against PFT-DPW on 2D Light Dark.
//!
//! [`run_matrix`] plays every configured (planner, particle count, episode)
//! combination with seeds derived from one base seed and writes a
//! line-delimited results file; [`summarize`] turns such a file back into a
//! table of per-cell means, confidence intervals and speedups.

pub mod config;
pub mod results;
pub mod run;
pub mod summary;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentSection};
pub use results::{Metric, Results, Row, Summary};
pub use run::{episode_seed, run_episode, run_matrix};
pub use summary::summarize;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("results: {0}")]
    Results(String),
    #[error("no data")]
    NoData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
