//! POMDP abstractions over non-parametric (particle) beliefs.
//!
//! Beliefs are ordered, equally weighted particle sets. Order is part of a
//! belief's identity: the likelihood of a propagated belief pairs particles by
//! index, so permuting either set changes the value.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::log_sum_exp;

/// Maximum number of fresh observations drawn by [`pf_step_with_retry`]
/// before a branch is declared dead.
pub const OBSERVATION_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PomdpError {
    #[error("every particle has zero observation likelihood")]
    AllWeightsZero,
    #[error("particle counts differ: expected {expected}, found {found}")]
    MismatchedCardinality { expected: usize, found: usize },
    #[error("a belief needs at least one particle")]
    EmptyBelief,
    #[error("state has a non-finite component")]
    NonFiniteState,
}

/// Ordered, equally weighted particle approximation of a posterior belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
}

impl<S> ParticleBelief<S> {
    pub fn new(particles: Vec<S>) -> Result<Self, PomdpError> {
        if particles.is_empty() {
            return Err(PomdpError::EmptyBelief);
        }
        Ok(Self { particles })
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn into_particles(self) -> Vec<S> {
        self.particles
    }
}

impl<S: AsRef<[f64]>> ParticleBelief<S> {
    /// Like [`ParticleBelief::new`] but also rejects NaN/infinite coordinates.
    pub fn checked(particles: Vec<S>) -> Result<Self, PomdpError> {
        if particles
            .iter()
            .any(|p| p.as_ref().iter().any(|c| !c.is_finite()))
        {
            return Err(PomdpError::NonFiniteState);
        }
        Self::new(particles)
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.particles)
    }
}

/// Particle set after the transition step and before observation reweighting.
///
/// `horizon_depth` is the number of planning steps that were expanded below
/// this node when it was created in a search tree (zero outside planning).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatedBelief<S> {
    particles: Vec<S>,
    pub horizon_depth: u32,
}

impl<S> PropagatedBelief<S> {
    pub fn new(particles: Vec<S>) -> Result<Self, PomdpError> {
        if particles.is_empty() {
            return Err(PomdpError::EmptyBelief);
        }
        Ok(Self {
            particles,
            horizon_depth: 0,
        })
    }

    pub fn with_horizon(mut self, horizon_depth: u32) -> Self {
        self.horizon_depth = horizon_depth;
        self
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

impl<S: AsRef<[f64]>> PropagatedBelief<S> {
    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.particles)
    }
}

fn mean_of<S: AsRef<[f64]>>(particles: &[S]) -> Vec<f64> {
    let dim = particles.first().map_or(0, |p| p.as_ref().len());
    let mut acc = vec![0.0; dim];
    for p in particles {
        for (a, c) in acc.iter_mut().zip(p.as_ref()) {
            *a += c;
        }
    }
    let m = particles.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

/// Everything a belief-dependent reward may look at for one filter step.
///
/// `obs_loglik[i]` is the observation log-likelihood of `propagated[i]`, so the
/// normalized observation weights of the propagated set are available without
/// re-evaluating the observation model.
pub struct BeliefStep<'a, S, A, O> {
    pub prior: &'a ParticleBelief<S>,
    pub action: &'a A,
    pub propagated: &'a PropagatedBelief<S>,
    pub observation: &'a O,
    pub obs_loglik: &'a [f64],
    pub posterior: &'a ParticleBelief<S>,
}

/// Action space descriptor.
pub enum ActionSpace<'a, A> {
    /// Finite ordered set; action widening walks it in order.
    Discrete(&'a [A]),
    /// Uncountable set; new actions come from [`GenerativeModel::sample_action`].
    Continuous,
}

/// Generative POMDP model: transition/observation samplers and densities plus a
/// belief-dependent reward.
pub trait GenerativeModel {
    type State: Clone + AsRef<[f64]>;
    type Action: Clone + PartialEq;
    type Observation: Clone;

    fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: &Self::State,
        a: &Self::Action,
        rng: &mut R,
    ) -> Self::State;

    /// `log P_T(next | s, a)`; `-inf` for zero density.
    fn transition_logdensity(&self, s: &Self::State, a: &Self::Action, next: &Self::State) -> f64;

    /// Noise-free (maximum likelihood) successor of `s` under `a`.
    fn transition_mode(&self, s: &Self::State, a: &Self::Action) -> Self::State;

    fn sample_observation<R: Rng + ?Sized>(&self, s: &Self::State, rng: &mut R)
        -> Self::Observation;

    /// `log P_O(o | s)`; `-inf` for zero density.
    fn observation_logdensity(&self, s: &Self::State, o: &Self::Observation) -> f64;

    fn reward(&self, step: &BeliefStep<'_, Self::State, Self::Action, Self::Observation>) -> f64;

    fn action_space(&self) -> ActionSpace<'_, Self::Action>;

    /// Uniform draw from the action space. Continuous models must override.
    fn sample_action<R: Rng + ?Sized>(
        &self,
        _b: &ParticleBelief<Self::State>,
        rng: &mut R,
    ) -> Self::Action {
        match self.action_space() {
            ActionSpace::Discrete(actions) => actions[rng.random_range(0..actions.len())].clone(),
            ActionSpace::Continuous => {
                panic!("continuous action spaces must override sample_action")
            }
        }
    }

    /// Problem-specific default (rollout) action. Falls back to a uniform draw.
    fn default_action<R: Rng + ?Sized>(
        &self,
        b: &ParticleBelief<Self::State>,
        rng: &mut R,
    ) -> Self::Action {
        self.sample_action(b, rng)
    }

    fn is_terminal(&self, _b: &ParticleBelief<Self::State>) -> bool {
        false
    }
}

pub type BeliefOf<M> = ParticleBelief<<M as GenerativeModel>::State>;
pub type PropagatedOf<M> = PropagatedBelief<<M as GenerativeModel>::State>;

/// Result of one particle-filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct PfOutcome<S, O> {
    pub posterior: ParticleBelief<S>,
    pub propagated: PropagatedBelief<S>,
    pub observation: O,
    pub reward: f64,
}

pub type PfOutcomeOf<M> =
    PfOutcome<<M as GenerativeModel>::State, <M as GenerativeModel>::Observation>;

/// Push every particle of `b` through the transition sampler, keeping order.
pub fn propagate<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    rng: &mut R,
) -> PropagatedOf<M> {
    let particles = b
        .particles()
        .iter()
        .map(|s| model.sample_transition(s, a, rng))
        .collect();
    PropagatedBelief {
        particles,
        horizon_depth: 0,
    }
}

/// Observation sampled from one propagated particle chosen uniformly.
pub fn sample_observation_from<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    propagated: &PropagatedOf<M>,
    rng: &mut R,
) -> M::Observation {
    let i = rng.random_range(0..propagated.len());
    model.sample_observation(&propagated.particles()[i], rng)
}

/// Reweight a propagated belief by `o`, resample back to `m` particles and
/// evaluate the reward. Exactly one reward evaluation per call.
pub fn update<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    propagated: PropagatedOf<M>,
    o: M::Observation,
    rng: &mut R,
) -> Result<PfOutcomeOf<M>, PomdpError> {
    let obs_loglik: Vec<f64> = propagated
        .particles()
        .iter()
        .map(|s| model.observation_logdensity(s, &o))
        .collect();
    let posterior = resample_log(propagated.particles(), &obs_loglik, b.len(), rng)?;
    let posterior = ParticleBelief { particles: posterior };
    let reward = model.reward(&BeliefStep {
        prior: b,
        action: a,
        propagated: &propagated,
        observation: &o,
        obs_loglik: &obs_loglik,
        posterior: &posterior,
    });
    Ok(PfOutcome {
        posterior,
        propagated,
        observation: o,
        reward,
    })
}

/// One particle-filter step `G_PF(m)`.
///
/// When `o` is `None` the observation is generated from a uniformly chosen
/// propagated particle.
pub fn pf_step<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    o: Option<M::Observation>,
    rng: &mut R,
) -> Result<PfOutcomeOf<M>, PomdpError> {
    let propagated = propagate(model, b, a, rng);
    let o = match o {
        Some(o) => o,
        None => sample_observation_from(model, &propagated, rng),
    };
    update(model, b, a, propagated, o, rng)
}

/// Simulated filter step used inside search: propagate once, then draw up to
/// [`OBSERVATION_RETRIES`] observations until one has nonzero likelihood.
pub fn pf_step_with_retry<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    rng: &mut R,
) -> Result<PfOutcomeOf<M>, PomdpError> {
    let propagated = propagate(model, b, a, rng);
    for _ in 0..OBSERVATION_RETRIES {
        let o = sample_observation_from(model, &propagated, rng);
        match update(model, b, a, propagated.clone(), o, rng) {
            Err(PomdpError::AllWeightsZero) => continue,
            other => return other,
        }
    }
    Err(PomdpError::AllWeightsZero)
}

/// Reward of an already-simulated transition, re-evaluated for a (possibly
/// different) prior belief and action.
pub fn evaluate_reward<M: GenerativeModel>(
    model: &M,
    prior: &BeliefOf<M>,
    action: &M::Action,
    propagated: &PropagatedOf<M>,
    observation: &M::Observation,
    posterior: &BeliefOf<M>,
) -> f64 {
    let obs_loglik: Vec<f64> = propagated
        .particles()
        .iter()
        .map(|s| model.observation_logdensity(s, observation))
        .collect();
    model.reward(&BeliefStep {
        prior,
        action,
        propagated,
        observation,
        obs_loglik: &obs_loglik,
        posterior,
    })
}

/// `log P(b⁻ | b, a) = log(1/m) + Σᵢ log P_T(s⁻ⁱ | sⁱ, a)`, particles paired by index.
pub fn propagated_log_likelihood<M: GenerativeModel>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    propagated: &PropagatedOf<M>,
) -> Result<f64, PomdpError> {
    if b.len() != propagated.len() {
        return Err(PomdpError::MismatchedCardinality {
            expected: b.len(),
            found: propagated.len(),
        });
    }
    let mut total = -(b.len() as f64).ln();
    for (s, next) in b.particles().iter().zip(propagated.particles()) {
        total += model.transition_logdensity(s, a, next);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Systematic resampling of `particles` with nonnegative `weights` into `m`
/// equally weighted draws, emitted in draw order.
pub fn resample<S: Clone, R: Rng + ?Sized>(
    particles: &[S],
    weights: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<S>, PomdpError> {
    if particles.len() != weights.len() {
        return Err(PomdpError::MismatchedCardinality {
            expected: particles.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().filter(|w| w.is_finite() && **w > 0.0).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(PomdpError::AllWeightsZero);
    }
    Ok(systematic(particles, weights, total, m, rng))
}

/// [`resample`] with weights given as log-weights.
pub fn resample_log<S: Clone, R: Rng + ?Sized>(
    particles: &[S],
    log_weights: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<S>, PomdpError> {
    if particles.len() != log_weights.len() {
        return Err(PomdpError::MismatchedCardinality {
            expected: particles.len(),
            found: log_weights.len(),
        });
    }
    let norm = log_sum_exp(log_weights.iter().copied());
    if norm == f64::NEG_INFINITY || norm.is_nan() {
        return Err(PomdpError::AllWeightsZero);
    }
    let weights: Vec<f64> = log_weights
        .iter()
        .map(|lw| if lw.is_nan() { 0.0 } else { (lw - norm).exp() })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(systematic(particles, &weights, total, m, rng))
}

fn systematic<S: Clone, R: Rng + ?Sized>(
    particles: &[S],
    weights: &[f64],
    total: f64,
    m: usize,
    rng: &mut R,
) -> Vec<S> {
    let step = total / m as f64;
    let mut pointer = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(m);
    let mut idx = 0;
    let mut cumulative = positive(weights[0]);
    for _ in 0..m {
        while pointer >= cumulative && idx + 1 < particles.len() {
            idx += 1;
            cumulative += positive(weights[idx]);
        }
        // Round-off can leave the pointer past the last positive weight.
        while positive(weights[idx]) == 0.0 && idx > 0 {
            idx -= 1;
        }
        out.push(particles[idx].clone());
        pointer += step;
    }
    out
}

fn positive(w: f64) -> f64 {
    if w.is_finite() && w > 0.0 {
        w
    } else {
        0.0
    }
}
