//! PFT-DPW: Monte Carlo tree search over particle beliefs with double
//! progressive widening and UCB action selection.
//!
//! The search engine in [`search`] is shared with the reuse planner, which
//! plugs into it at the root; [`pft_plan`] runs it with no reuse at all.

pub mod search;
pub mod tree;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pomdp::{pf_step_with_retry, BeliefOf, GenerativeModel, ParticleBelief};
pub use search::{plan_with_hook, NoReuse, RootHook, SearchCtx};
pub use tree::{ActionId, BeliefId, PropId, SearchTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must lie in (0, 1)")]
    OutOfUnitInterval(&'static str),
    #[error("gamma must lie in (0, 1]")]
    Discount,
}

/// Policy followed below freshly expanded nodes and when filling horizon gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    /// The model's [`GenerativeModel::default_action`].
    Default,
    /// Uniform draws from the action space.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Simulation budget `n` per planning session.
    pub iterations: u64,
    /// Search depth `d_max`.
    pub horizon: u32,
    pub gamma: f64,
    /// Widening constants may be infinite (always widen).
    #[serde(with = "widening")]
    pub k_action: f64,
    pub alpha_action: f64,
    #[serde(with = "widening")]
    pub k_obs: f64,
    pub alpha_obs: f64,
    pub c_ucb: f64,
    /// Reuse admission threshold: candidates need strictly more visits.
    pub n_min: u64,
    pub rollout: RolloutPolicy,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            horizon: 10,
            gamma: 1.0,
            k_action: 100.0,
            alpha_action: 0.5,
            k_obs: 1.0,
            alpha_obs: 0.1,
            c_ucb: 1.0,
            n_min: 10,
            rollout: RolloutPolicy::Default,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::NonPositive("iterations"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::Discount);
        }
        for (name, v) in [
            ("k_action", self.k_action),
            ("k_obs", self.k_obs),
            ("c_ucb", self.c_ucb),
        ] {
            if !(v > 0.0) {
                return Err(ConfigError::NonPositive(name));
            }
        }
        for (name, v) in [
            ("alpha_action", self.alpha_action),
            ("alpha_obs", self.alpha_obs),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::OutOfUnitInterval(name));
            }
        }
        Ok(())
    }
}

/// Widening constants as a number, or the string `"inf"` for infinity, which
/// JSON cannot represent.
mod widening {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &f64, s: S) -> Result<S::Ok, S::Error> {
        if k.is_infinite() && *k > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*k)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(k) => Ok(k),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", found \"{t}\""
            ))),
        }
    }
}

/// Counters collected during one planning session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStats {
    /// Calls of the root simulate procedure.
    pub simulations: u64,
    /// Final value of the simulation counter (reuse advances it by `N(b⁻)`).
    pub counter: u64,
    /// Reward evaluations, including rollouts and horizon filling.
    pub reward_calls: u64,
    /// Branches dropped because no observation had nonzero likelihood.
    pub pruned: u64,
    /// Reused subtrees attached at the root.
    pub reused: u64,
    /// Sum of `N(b⁻)` over reused subtrees.
    pub reused_visits: u64,
    /// Candidates dropped because the root cannot generate them.
    pub discarded: u64,
    pub fill_nodes: u64,
    pub fill_reward_calls: u64,
    /// Proposal density evaluations made by root estimators.
    pub density_evals: u64,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome<S, A, O> {
    pub action: A,
    pub tree: SearchTree<S, A, O>,
    pub stats: PlanStats,
}

pub type OutcomeOf<M> = PlanOutcome<
    <M as GenerativeModel>::State,
    <M as GenerativeModel>::Action,
    <M as GenerativeModel>::Observation,
>;

pub type TreeOf<M> = SearchTree<
    <M as GenerativeModel>::State,
    <M as GenerativeModel>::Action,
    <M as GenerativeModel>::Observation,
>;

/// Plan from `b` with PFT-DPW and return the greedy root action.
pub fn pft_plan<M: GenerativeModel, R: Rng + ?Sized>(
    b: &BeliefOf<M>,
    cfg: &PlannerConfig,
    model: &M,
    rng: &mut R,
) -> OutcomeOf<M> {
    plan_with_hook(b.clone(), cfg, model, &mut NoReuse, rng)
}

/// Result of a rollout: discounted reward sum and where it stopped.
#[derive(Debug, Clone)]
pub struct RolloutResult<S> {
    pub value: f64,
    pub end: ParticleBelief<S>,
    pub steps: u32,
    /// Stopped early at a terminal belief or a dead filter branch.
    pub stopped: bool,
}

/// Follow the rollout policy for up to `d` filter steps from `b`.
pub fn rollout_from<M: GenerativeModel, R: Rng + ?Sized>(
    b: &BeliefOf<M>,
    d: u32,
    cfg: &PlannerConfig,
    model: &M,
    rng: &mut R,
) -> RolloutResult<M::State> {
    let mut belief = b.clone();
    let mut value = 0.0;
    let mut discount = 1.0;
    for step in 0..d {
        if model.is_terminal(&belief) {
            return RolloutResult {
                value,
                end: belief,
                steps: step,
                stopped: true,
            };
        }
        let a = match cfg.rollout {
            RolloutPolicy::Default => model.default_action(&belief, rng),
            RolloutPolicy::Random => model.sample_action(&belief, rng),
        };
        match pf_step_with_retry(model, &belief, &a, rng) {
            Ok(out) => {
                value += discount * out.reward;
                discount *= cfg.gamma;
                belief = out.posterior;
            }
            Err(_) => {
                return RolloutResult {
                    value,
                    end: belief,
                    steps: step,
                    stopped: true,
                }
            }
        }
    }
    let stopped = model.is_terminal(&belief);
    RolloutResult {
        value,
        end: belief,
        steps: d,
        stopped,
    }
}

/// Discounted return of a `d`-step rollout from `b`.
pub fn rollout<M: GenerativeModel, R: Rng + ?Sized>(
    b: &BeliefOf<M>,
    d: u32,
    cfg: &PlannerConfig,
    model: &M,
    rng: &mut R,
) -> f64 {
    rollout_from(b, d, cfg, model, rng).value
}
