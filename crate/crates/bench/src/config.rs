//! Experiment configuration, read from a TOML file.

use std::path::Path;

use irpft::lightdark::LightDarkConfig;
use irpft::{Planner, PlannerConfig};
use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

/// Matrix dimensions and seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub planners: Vec<Planner>,
    /// Particle counts `m`, one cell per value and planner.
    pub particles: Vec<usize>,
    pub episodes: u32,
    pub seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            planners: vec![Planner::Pft, Planner::IrPft],
            particles: vec![5, 10, 15, 20],
            episodes: 20,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub planner: PlannerConfig,
    pub environment: LightDarkConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.planners.is_empty() {
            return Err(BenchError::Config("experiment.planners is empty".into()));
        }
        if e.particles.is_empty() || e.particles.contains(&0) {
            return Err(BenchError::Config(
                "experiment.particles must be a nonempty list of positive counts".into(),
            ));
        }
        if e.episodes == 0 {
            return Err(BenchError::Config("experiment.episodes must be at least 1".into()));
        }
        self.planner
            .validate()
            .map_err(|err| BenchError::Config(format!("planner: {err}")))?;
        self.environment
            .validate()
            .map_err(|err| BenchError::Config(format!("environment: {err}")))?;
        Ok(())
    }
}
