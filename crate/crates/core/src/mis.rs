//! Importance sampling and balance-heuristic multiple importance sampling.
//!
//! [`MisAccumulator`] keeps one log-denominator `ln Σⱼ nⱼ qⱼ(x)` per unique
//! sample and updates it as batches arrive: a batch of `L` draws from
//! distribution `m'` adds `L·q_{m'}(x)` to every stored denominator and
//! evaluates each new sample against all registered distributions. No
//! sample-by-distribution matrix is retained.
//!
//! Samples are grouped: an entry stands for `count` draws of the same point,
//! with `f_sum` the sum of their integrand values. Grouping is algebraic only,
//! the estimate equals the ungrouped sum.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::log_add;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MisError {
    #[error("proposal density is zero at a sample")]
    ZeroProposalDensity,
    #[error("no proposal evaluator registered for distribution {0:?}")]
    UnknownDistribution(DistId),
    #[error("accumulator holds no samples")]
    EmptyAccumulator,
    #[error("entry {0} does not exist")]
    UnknownEntry(usize),
}

pub type Result<T> = std::result::Result<T, MisError>;

/// Opaque caller-chosen identity of a proposal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistId(pub u64);

/// Index of a sample entry inside one accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntryId(pub usize);

/// Source of proposal log-densities `ln q_m(x)`.
pub trait ProposalSet<X> {
    /// `None` when `dist` is not known to this set.
    fn log_density(&self, dist: DistId, x: &X) -> Option<f64>;
}

type LogDensityFn<'a, X> = Box<dyn Fn(&X) -> f64 + 'a>;

/// Closure-backed [`ProposalSet`].
pub struct ProposalRegistry<'a, X> {
    evaluators: HashMap<DistId, LogDensityFn<'a, X>>,
}

impl<X> Default for ProposalRegistry<'_, X> {
    fn default() -> Self {
        Self {
            evaluators: HashMap::new(),
        }
    }
}

impl<'a, X> ProposalRegistry<'a, X> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, dist: DistId, log_density: impl Fn(&X) -> f64 + 'a) {
        self.evaluators.insert(dist, Box::new(log_density));
    }
}

impl<X> ProposalSet<X> for ProposalRegistry<'_, X> {
    fn log_density(&self, dist: DistId, x: &X) -> Option<f64> {
        self.evaluators.get(&dist).map(|f| f(x))
    }
}

/// One element of a batch passed to [`MisAccumulator::add_batch`].
#[derive(Debug, Clone, PartialEq)]
pub enum BatchSample<X> {
    /// A point not yet in the accumulator, drawn `count` times.
    New {
        x: X,
        f: f64,
        target_logdensity: f64,
        count: u64,
    },
    /// One more draw of an existing entry's point.
    Repeat { entry: EntryId, f: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEntry<X> {
    pub x: X,
    pub f_sum: f64,
    pub count: u64,
    pub target_logdensity: f64,
    /// `ln Σⱼ nⱼ qⱼ(x)` over all registered distributions.
    pub log_denom: f64,
    pub origin: DistId,
}

/// Operation counts, kept so complexity claims can be checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MisTelemetry {
    /// Proposal density evaluations made by the latest `add_batch` call.
    pub last_call_evals: u64,
    pub total_evals: u64,
    pub batches: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisAccumulator<X> {
    /// Distribution whose density equals the target; its proposal density is
    /// read from the cached `target_logdensity` instead of being evaluated.
    target: Option<DistId>,
    counts: Vec<(DistId, u64)>,
    entries: Vec<SampleEntry<X>>,
    estimate: f64,
    telemetry: MisTelemetry,
}

impl<X> Default for MisAccumulator<X> {
    fn default() -> Self {
        Self::new(None)
    }
}

impl<X> MisAccumulator<X> {
    pub fn new(target: Option<DistId>) -> Self {
        Self {
            target,
            counts: Vec::new(),
            entries: Vec::new(),
            estimate: 0.0,
            telemetry: MisTelemetry::default(),
        }
    }

    pub fn entries(&self) -> &[SampleEntry<X>] {
        &self.entries
    }

    pub fn entry(&self, id: EntryId) -> Option<&SampleEntry<X>> {
        self.entries.get(id.0)
    }

    pub fn telemetry(&self) -> MisTelemetry {
        self.telemetry
    }

    /// Registered distributions with their sample counts `n_m`.
    pub fn distributions(&self) -> &[(DistId, u64)] {
        &self.counts
    }

    pub fn count_of(&self, dist: DistId) -> u64 {
        self.counts
            .iter()
            .find(|(d, _)| *d == dist)
            .map_or(0, |(_, n)| *n)
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn log_q<P: ProposalSet<X>>(
        &self,
        proposals: &P,
        dist: DistId,
        x: &X,
        target_logdensity: f64,
        evals: &mut u64,
    ) -> Result<f64> {
        if self.target == Some(dist) {
            return Ok(target_logdensity);
        }
        *evals += 1;
        proposals
            .log_density(dist, x)
            .ok_or(MisError::UnknownDistribution(dist))
    }

    /// Add a batch drawn from `origin` and return the updated estimate.
    ///
    /// All densities are evaluated before anything is mutated, so an error
    /// leaves the accumulator unchanged.
    pub fn add_batch<P: ProposalSet<X>>(
        &mut self,
        origin: DistId,
        batch: Vec<BatchSample<X>>,
        proposals: &P,
    ) -> Result<f64> {
        let mut evals = 0u64;
        let added: u64 = batch
            .iter()
            .map(|s| match s {
                BatchSample::New { count, .. } => *count,
                BatchSample::Repeat { .. } => 1,
            })
            .sum();
        for s in &batch {
            if let BatchSample::Repeat { entry, .. } = s {
                if entry.0 >= self.entries.len() {
                    return Err(MisError::UnknownEntry(entry.0));
                }
            }
        }

        // Existing entries gain L·q_origin(x).
        let ln_added = (added as f64).ln();
        let mut existing = Vec::with_capacity(self.entries.len());
        if added > 0 {
            for e in &self.entries {
                let lq = self.log_q(proposals, origin, &e.x, e.target_logdensity, &mut evals)?;
                existing.push(ln_added + lq);
            }
        }

        // New entries are evaluated against every distribution, with counts as
        // they will be after this batch.
        let mut new_counts = self.counts.clone();
        match new_counts.iter_mut().find(|(d, _)| *d == origin) {
            Some((_, n)) => *n += added,
            None => new_counts.push((origin, added)),
        }
        let mut fresh_denoms = Vec::new();
        for s in &batch {
            if let BatchSample::New {
                x,
                target_logdensity,
                ..
            } = s
            {
                let mut denom = f64::NEG_INFINITY;
                for &(dist, n) in &new_counts {
                    if n == 0 {
                        continue;
                    }
                    let lq = self.log_q(proposals, dist, x, *target_logdensity, &mut evals)?;
                    denom = log_add(denom, (n as f64).ln() + lq);
                }
                fresh_denoms.push(denom);
            }
        }

        for (e, delta) in self.entries.iter_mut().zip(existing) {
            e.log_denom = log_add(e.log_denom, delta);
        }
        self.counts = new_counts;
        let mut fresh = fresh_denoms.into_iter();
        for s in batch {
            match s {
                BatchSample::New {
                    x,
                    f,
                    target_logdensity,
                    count,
                } => self.entries.push(SampleEntry {
                    x,
                    f_sum: f,
                    count,
                    target_logdensity,
                    log_denom: fresh.next().expect("one denominator per new sample"),
                    origin,
                }),
                BatchSample::Repeat { entry, f } => {
                    let e = &mut self.entries[entry.0];
                    e.f_sum += f;
                    e.count += 1;
                }
            }
        }

        self.telemetry.last_call_evals = evals;
        self.telemetry.total_evals += evals;
        self.telemetry.batches += 1;
        self.estimate = self.recompute();
        Ok(self.estimate)
    }

    /// Overwrite an entry's integrand sum (returns can change after insertion,
    /// e.g. when a reused subtree is extended).
    pub fn replace_f_value(&mut self, entry: EntryId, f_sum: f64) -> Result<f64> {
        let e = self
            .entries
            .get_mut(entry.0)
            .ok_or(MisError::UnknownEntry(entry.0))?;
        e.f_sum = f_sum;
        self.estimate = self.recompute();
        Ok(self.estimate)
    }

    /// Balance-heuristic weight of `entry`: `p(x) / Σⱼ nⱼ qⱼ(x)`.
    pub fn weight(&self, entry: EntryId) -> Option<f64> {
        self.entries.get(entry.0).map(entry_weight)
    }

    /// `w_m(x) = n_m q_m(x) / Σⱼ nⱼ qⱼ(x)` for every registered distribution,
    /// using the stored incremental denominator.
    pub fn balance_weights<P: ProposalSet<X>>(
        &self,
        entry: EntryId,
        proposals: &P,
    ) -> Result<Vec<(DistId, f64)>> {
        let e = self
            .entries
            .get(entry.0)
            .ok_or(MisError::UnknownEntry(entry.0))?;
        let mut evals = 0;
        let mut out = Vec::with_capacity(self.counts.len());
        for &(dist, n) in &self.counts {
            let w = if n == 0 {
                0.0
            } else {
                let lq = self.log_q(proposals, dist, &e.x, e.target_logdensity, &mut evals)?;
                ((n as f64).ln() + lq - e.log_denom).exp()
            };
            out.push((dist, w));
        }
        Ok(out)
    }

    fn recompute(&self) -> f64 {
        self.entries.iter().map(|e| entry_weight(e) * e.f_sum).sum()
    }

    /// Current estimate `Σ p(x)/Σⱼ nⱼ qⱼ(x) · f`.
    pub fn mis_estimate(&self) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(MisError::EmptyAccumulator);
        }
        Ok(self.estimate)
    }
}

fn entry_weight<X>(e: &SampleEntry<X>) -> f64 {
    if e.target_logdensity == f64::NEG_INFINITY {
        return 0.0;
    }
    (e.target_logdensity - e.log_denom).exp()
}

/// One importance sample given by its integrand value and log-densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsSample {
    pub f: f64,
    pub log_p: f64,
    pub log_q: f64,
}

/// Plain importance sampling estimate `(1/N) Σ (p/q) f`.
pub fn is_estimate(samples: &[IsSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(MisError::EmptyAccumulator);
    }
    let mut total = 0.0;
    for s in samples {
        if s.log_q == f64::NEG_INFINITY || s.log_q.is_nan() {
            return Err(MisError::ZeroProposalDensity);
        }
        if s.log_p == f64::NEG_INFINITY {
            continue;
        }
        total += (s.log_p - s.log_q).exp() * s.f;
    }
    Ok(total / samples.len() as f64)
}
