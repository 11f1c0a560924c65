//! Online POMDP planning over particle beliefs with trajectory reuse.
//!
//! The crate provides a particle-filter POMDP layer ([`pomdp`]), importance
//! sampling estimators with incremental balance-heuristic updates ([`mis`]),
//! the PFT-DPW tree search ([`pft`]), the reuse planner IR-PFT ([`irpft`]) built
//! on the same search engine, and the 2D Light Dark benchmark ([`lightdark`]).

pub mod entropy;
pub mod irpft;
pub mod lightdark;
pub mod mis;
pub mod models;
pub mod numeric;
pub mod pft;
pub mod pomdp;
pub mod reuse;
pub mod seeding;

pub use irpft::{irpft_plan, solve_loop, Environment, EpisodeTrace, Planner, SimulatedEnv};
pub use pft::{pft_plan, PlanOutcome, PlanStats, PlannerConfig, RolloutPolicy, SearchTree};
pub use pomdp::{
    pf_step, propagated_log_likelihood, resample, GenerativeModel, ParticleBelief,
    PomdpError, PropagatedBelief,
};
pub use reuse::candidates::CandidatePool;
