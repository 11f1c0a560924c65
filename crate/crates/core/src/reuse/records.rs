//! Stored trajectories and experience-based action-value estimation.
//!
//! A record keeps the belief/action it started from and the suffix that
//! followed. Re-weighting a suffix for a different starting belief only needs
//! the first propagated belief: every later factor of the suffix density is
//! shared by both starting points and cancels.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ReuseError, Result};
use crate::mis::{BatchSample, DistId, MisAccumulator, ProposalRegistry};
use crate::pomdp::{
    evaluate_reward, propagated_log_likelihood, GenerativeModel, ParticleBelief, PropagatedBelief,
};

/// One step of a stored suffix. The last step of a record has no action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuffixStep<S, A, O> {
    pub propagated: PropagatedBelief<S>,
    pub observation: O,
    pub posterior: ParticleBelief<S>,
    pub action: Option<A>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord<S, A, O> {
    /// Identity of the distribution the suffix was drawn from, i.e. of the
    /// (belief, action) node it started at.
    pub origin: DistId,
    /// Identity of the first propagated belief; records sharing it are grouped.
    pub group: u64,
    pub origin_belief: ParticleBelief<S>,
    pub origin_action: A,
    pub suffix: Vec<SuffixStep<S, A, O>>,
    pub step_rewards: Vec<f64>,
    pub return_g: f64,
}

pub type RecordOf<M> = TrajectoryRecord<
    <M as GenerativeModel>::State,
    <M as GenerativeModel>::Action,
    <M as GenerativeModel>::Observation,
>;

impl<S, A, O> TrajectoryRecord<S, A, O> {
    /// Build a record, computing the return as the undiscounted reward sum.
    pub fn new(
        origin: DistId,
        group: u64,
        origin_belief: ParticleBelief<S>,
        origin_action: A,
        suffix: Vec<SuffixStep<S, A, O>>,
        step_rewards: Vec<f64>,
    ) -> Result<Self> {
        let return_g = step_rewards.iter().sum();
        let record = Self {
            origin,
            group,
            origin_belief,
            origin_action,
            suffix,
            step_rewards,
            return_g,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn horizon(&self) -> usize {
        self.suffix.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.suffix.is_empty() || self.step_rewards.is_empty() {
            return Err(ReuseError::EmptyTrajectory);
        }
        if self.suffix.len() != self.step_rewards.len() {
            return Err(ReuseError::InvalidRecord(format!(
                "{} suffix steps but {} rewards",
                self.suffix.len(),
                self.step_rewards.len()
            )));
        }
        let last = self.suffix.len() - 1;
        for (i, step) in self.suffix.iter().enumerate() {
            if (i == last) == step.action.is_some() {
                return Err(ReuseError::InvalidRecord(format!(
                    "step {i}: only the last step may lack an action"
                )));
            }
        }
        let sum: f64 = self.step_rewards.iter().sum();
        if (sum - self.return_g).abs() > 1e-9 * sum.abs().max(1.0) {
            return Err(ReuseError::InvalidRecord(format!(
                "return {} differs from reward sum {sum}",
                self.return_g
            )));
        }
        Ok(())
    }
}

/// Return with the first reward replaced: `G − r_old + r_new`.
pub fn adjusted_return<S, A, O>(
    record: &TrajectoryRecord<S, A, O>,
    new_first_reward: f64,
) -> Result<f64> {
    let first = record
        .step_rewards
        .first()
        .ok_or(ReuseError::EmptyTrajectory)?;
    Ok(record.return_g - first + new_first_reward)
}

/// `ln P(b⁻|b_k,a_k) − ln P(b⁻|b_origin,a_origin)` for the record's first
/// propagated belief `b⁻`.
pub fn suffix_log_weight<M: GenerativeModel>(
    model: &M,
    b_k: &ParticleBelief<M::State>,
    a_k: &M::Action,
    record: &RecordOf<M>,
) -> Result<f64> {
    let first = record.suffix.first().ok_or(ReuseError::EmptyTrajectory)?;
    let num = propagated_log_likelihood(model, b_k, a_k, &first.propagated)?;
    if num == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let den = propagated_log_likelihood(
        model,
        &record.origin_belief,
        &record.origin_action,
        &first.propagated,
    )?;
    if den == f64::NEG_INFINITY {
        return Err(ReuseError::InvalidRecord(
            "suffix has zero density under its own origin".into(),
        ));
    }
    Ok(num - den)
}

/// Reward of the record's first step re-evaluated from `(b_k, a_k)`.
pub fn first_reward_from<M: GenerativeModel>(
    model: &M,
    b_k: &ParticleBelief<M::State>,
    a_k: &M::Action,
    record: &RecordOf<M>,
) -> Result<f64> {
    let first = record.suffix.first().ok_or(ReuseError::EmptyTrajectory)?;
    Ok(evaluate_reward(
        model,
        b_k,
        a_k,
        &first.propagated,
        &first.observation,
        &first.posterior,
    ))
}

/// Mean return of records that all start at the queried node.
pub fn q_simple_reuse<S, A, O>(records: &[TrajectoryRecord<S, A, O>]) -> Result<f64> {
    let first = records.first().ok_or(ReuseError::EmptySet)?;
    if records.iter().any(|r| r.origin != first.origin) {
        return Err(ReuseError::InvalidRecord(
            "records start at different origins".into(),
        ));
    }
    Ok(records.iter().map(|r| r.return_g).sum::<f64>() / records.len() as f64)
}

/// Balance-heuristic MIS estimate of `Q(b_k, a_k)` from stored trajectories.
///
/// Distributions are the records' origins with `n_j` = number of records per
/// origin. Records sharing a first propagated belief form one entry whose
/// weight `P(b⁻|b_k,a_k) / Σⱼ nⱼ P(b⁻|bⱼ,aⱼ)` multiplies the sum of their
/// adjusted returns.
pub fn q_mis_experience<M: GenerativeModel>(
    model: &M,
    b_k: &ParticleBelief<M::State>,
    a_k: &M::Action,
    records: &[RecordOf<M>],
) -> Result<f64> {
    if records.is_empty() {
        return Err(ReuseError::EmptyDataset);
    }
    struct Group {
        origin: DistId,
        first: usize,
        count: u64,
        f_sum: f64,
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut by_key: HashMap<u64, usize> = HashMap::new();
    let mut origin_rep: HashMap<DistId, usize> = HashMap::new();
    let mut origin_order: Vec<DistId> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let g_tilde = adjusted_return(r, first_reward_from(model, b_k, a_k, r)?)?;
        if let std::collections::hash_map::Entry::Vacant(e) = origin_rep.entry(r.origin) {
            e.insert(i);
            origin_order.push(r.origin);
        }
        match by_key.get(&r.group) {
            Some(&g) => {
                if groups[g].origin != r.origin {
                    return Err(ReuseError::InvalidRecord(format!(
                        "group {} spans several origins",
                        r.group
                    )));
                }
                groups[g].count += 1;
                groups[g].f_sum += g_tilde;
            }
            None => {
                by_key.insert(r.group, groups.len());
                groups.push(Group {
                    origin: r.origin,
                    first: i,
                    count: 1,
                    f_sum: g_tilde,
                });
            }
        }
    }

    // Entries are keyed by the index of their group's first record.
    let mut registry = ProposalRegistry::new();
    for (&dist, &rep) in &origin_rep {
        let rec = &records[rep];
        registry.register(dist, move |group: &usize| {
            let x = &records[*group].suffix[0].propagated;
            propagated_log_likelihood(model, &rec.origin_belief, &rec.origin_action, x)
                .unwrap_or(f64::NEG_INFINITY)
        });
    }

    let mut acc = MisAccumulator::<usize>::new(None);
    let mut any_reachable = false;
    for dist in origin_order {
        let mut batch = Vec::new();
        for g in groups.iter().filter(|g| g.origin == dist) {
            let x = &records[g.first].suffix[0].propagated;
            let target = propagated_log_likelihood(model, b_k, a_k, x)?;
            any_reachable |= target > f64::NEG_INFINITY;
            batch.push(BatchSample::New {
                x: g.first,
                f: g.f_sum,
                target_logdensity: target,
                count: g.count,
            });
        }
        acc.add_batch(dist, batch, &registry)?;
    }
    if !any_reachable {
        return Err(ReuseError::AllWeightsZero);
    }
    Ok(acc.mis_estimate()?)
}

/// One exported line: summary fields followed by the full record.
#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize, A: Serialize, O: Serialize",
    deserialize = "S: Deserialize<'de>, A: Deserialize<'de>, O: Deserialize<'de>"
))]
struct RecordLine<S, A, O> {
    origin_mean: Vec<f64>,
    horizon: usize,
    #[serde(flatten)]
    record: TrajectoryRecord<S, A, O>,
}

/// Write records as line-delimited JSON, one trajectory per line.
pub fn export_records<S, A, O, W>(records: &[TrajectoryRecord<S, A, O>], mut out: W) -> Result<()>
where
    S: Serialize + Clone + AsRef<[f64]>,
    A: Serialize + Clone,
    O: Serialize + Clone,
    W: Write,
{
    for r in records {
        let line = RecordLine {
            origin_mean: r.origin_belief.mean(),
            horizon: r.horizon(),
            record: r.clone(),
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| ReuseError::Format(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read records written by [`export_records`]. Blank lines are skipped.
pub fn import_records<S, A, O, B>(input: B) -> Result<Vec<TrajectoryRecord<S, A, O>>>
where
    S: for<'de> Deserialize<'de>,
    A: for<'de> Deserialize<'de>,
    O: for<'de> Deserialize<'de>,
    B: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine<S, A, O> = serde_json::from_str(&line)
            .map_err(|e| ReuseError::Format(format!("line {}: {e}", i + 1)))?;
        parsed.record.validate()?;
        out.push(parsed.record);
    }
    Ok(out)
}
