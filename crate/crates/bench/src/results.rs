//! Results file: one JSON object per line, tagged by `kind`.
//!
//! The file starts with a header carrying the schema version and the full
//! configuration, continues with session and episode rows, and ends with the
//! aggregate block (aggregate and speedup rows). Field order is fixed by the
//! struct definitions below.

use std::io::{BufRead, Write};

use irpft::Planner;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{BenchError, Result};

pub const SCHEMA: &str = "irpft-bench/1";

/// z value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub config: ExperimentConfig,
}

/// One planning session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub planner: Planner,
    pub particles: usize,
    pub episode: u32,
    pub step: u32,
    pub seed: u64,
    /// Wall time of the plan call in milliseconds.
    pub plan_ms: f64,
    pub reward_calls: u64,
    pub simulations: u64,
    pub counter: u64,
    pub reused: u64,
    pub reused_visits: u64,
    pub fill_nodes: u64,
    pub density_evals: u64,
    pub candidates: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub planner: Planner,
    pub particles: usize,
    pub episode: u32,
    pub seed: u64,
    pub steps: u32,
    pub total_reward: f64,
    pub reached_goal: bool,
    pub mean_plan_ms: f64,
}

/// Which per-cell quantity an aggregate row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Per-session planning time.
    PlanMs,
    /// Per-session reward evaluations.
    RewardCalls,
    /// Per-episode accumulated reward.
    TotalReward,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::PlanMs, Metric::RewardCalls, Metric::TotalReward];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PlanMs => "plan_ms",
            Metric::RewardCalls => "reward_calls",
            Metric::TotalReward => "total_reward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = Z95 * std / (n as f64).sqrt();
        Some(Self {
            n,
            mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
        })
    }

    pub fn overlaps(&self, other: &Summary) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub planner: Planner,
    pub particles: usize,
    pub metric: Metric,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Mean session time of PFT-DPW divided by that of IR-PFT for one `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub particles: usize,
    pub pft_ms: f64,
    pub irpft_ms: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Row {
    Header(Header),
    Session(SessionRow),
    Episode(EpisodeRow),
    Aggregate(AggregateRow),
    Speedup(SpeedupRow),
}

/// Parsed content of a results file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Results {
    pub header: Option<Header>,
    pub sessions: Vec<SessionRow>,
    pub episodes: Vec<EpisodeRow>,
    pub aggregates: Vec<AggregateRow>,
    pub speedups: Vec<SpeedupRow>,
}

impl Results {
    pub fn push(&mut self, row: Row) {
        match row {
            Row::Header(h) => self.header = Some(h),
            Row::Session(r) => self.sessions.push(r),
            Row::Episode(r) => self.episodes.push(r),
            Row::Aggregate(r) => self.aggregates.push(r),
            Row::Speedup(r) => self.speedups.push(r),
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line)
                .map_err(|e| BenchError::Results(format!("line {}: {e}", i + 1)))?;
            if i == 0 {
                match &row {
                    Row::Header(h) if h.schema == SCHEMA => {}
                    Row::Header(h) => {
                        return Err(BenchError::Results(format!(
                            "unsupported schema '{}' (expected {SCHEMA})",
                            h.schema
                        )))
                    }
                    _ => return Err(BenchError::Results("line 1: missing header".into())),
                }
            }
            out.push(row);
        }
        if out.header.is_none() {
            return Err(BenchError::Results("missing header".into()));
        }
        Ok(out)
    }

    /// Cells present in the session and episode rows, sorted.
    pub fn cells(&self) -> Vec<(Planner, usize)> {
        let mut cells: Vec<(Planner, usize)> = self
            .sessions
            .iter()
            .map(|r| (r.planner, r.particles))
            .chain(self.episodes.iter().map(|r| (r.planner, r.particles)))
            .collect();
        cells.sort();
        cells.dedup();
        cells
    }

    pub fn values(&self, planner: Planner, particles: usize, metric: Metric) -> Vec<f64> {
        let sessions = self
            .sessions
            .iter()
            .filter(|r| r.planner == planner && r.particles == particles);
        match metric {
            Metric::PlanMs => sessions.map(|r| r.plan_ms).collect(),
            Metric::RewardCalls => sessions.map(|r| r.reward_calls as f64).collect(),
            Metric::TotalReward => self
                .episodes
                .iter()
                .filter(|r| r.planner == planner && r.particles == particles)
                .map(|r| r.total_reward)
                .collect(),
        }
    }

    /// Recompute the aggregate block from the session and episode rows.
    pub fn compute_aggregates(&self) -> (Vec<AggregateRow>, Vec<SpeedupRow>) {
        let mut aggregates = Vec::new();
        for (planner, particles) in self.cells() {
            for metric in Metric::ALL {
                if let Some(summary) = Summary::of(&self.values(planner, particles, metric)) {
                    aggregates.push(AggregateRow {
                        planner,
                        particles,
                        metric,
                        summary,
                    });
                }
            }
        }
        let mut speedups = Vec::new();
        let mut ms: Vec<usize> = self.cells().into_iter().map(|(_, m)| m).collect();
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            let mean = |p| Summary::of(&self.values(p, m, Metric::PlanMs)).map(|s| s.mean);
            if let (Some(pft), Some(irpft)) = (mean(Planner::Pft), mean(Planner::IrPft)) {
                speedups.push(SpeedupRow {
                    particles: m,
                    pft_ms: pft,
                    irpft_ms: irpft,
                    speedup: pft / irpft,
                });
            }
        }
        (aggregates, speedups)
    }

    pub fn aggregate(&self, planner: Planner, particles: usize, metric: Metric) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|r| r.planner == planner && r.particles == particles && r.metric == metric)
    }
}

pub fn write_row<W: Write>(out: &mut W, row: &Row) -> Result<()> {
    serde_json::to_writer(&mut *out, row).map_err(|e| BenchError::Results(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}
