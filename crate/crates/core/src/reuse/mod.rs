//! Trajectory reuse: stored trajectories with their experience-based
//! estimators ([`records`]) and the pool of previous-session subtrees the
//! planner draws from ([`candidates`]).

pub mod candidates;
pub mod records;

use thiserror::Error;

use crate::mis::MisError;
use crate::pomdp::PomdpError;

#[derive(Debug, Error)]
pub enum ReuseError {
    #[error("trajectory has no steps")]
    EmptyTrajectory,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no records to average")]
    EmptySet,
    #[error("no stored suffix is reachable from the queried belief and action")]
    AllWeightsZero,
    #[error("no reuse candidates left")]
    NoCandidates,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("malformed record file: {0}")]
    Format(String),
    #[error(transparent)]
    Pomdp(#[from] PomdpError),
    #[error(transparent)]
    Mis(#[from] MisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReuseError>;

pub use candidates::{update_reuse_candidates, Candidate, CandidatePool};
pub use records::{
    adjusted_return, export_records, import_records, q_mis_experience, q_simple_reuse,
    suffix_log_weight, SuffixStep, TrajectoryRecord,
};
