//! Particle-filter differential entropy estimate (Boers et al. estimator).
//!
//! Evaluated on the observation-weighted propagated set, before resampling:
//!
//! `Ĥ = ln[Σᵢ P_O(o|s'ⁱ)/m] − Σᵢ wⁱ ln[P_O(o|s'ⁱ) · Σⱼ P_T(s'ⁱ|sⱼ,a)/m]`
//!
//! with `sⱼ` the prior particles and `wⁱ ∝ P_O(o|s'ⁱ)`. Cost is O(m²)
//! transition density evaluations.

use crate::pomdp::{BeliefOf, GenerativeModel, PomdpError};

/// Entropy estimate from precomputed observation log-likelihoods of the
/// propagated particles.
pub fn boers_entropy_weighted<M: GenerativeModel>(
    model: &M,
    prior: &BeliefOf<M>,
    action: &M::Action,
    propagated: &[M::State],
    obs_loglik: &[f64],
) -> Result<f64, PomdpError> {
    if propagated.len() != obs_loglik.len() {
        return Err(PomdpError::MismatchedCardinality {
            expected: propagated.len(),
            found: obs_loglik.len(),
        });
    }
    let max_obs = obs_loglik
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_obs == f64::NEG_INFINITY {
        return Err(PomdpError::AllWeightsZero);
    }
    let obs_sum: f64 = obs_loglik.iter().map(|l| (l - max_obs).exp()).sum();
    let log_obs_total = max_obs + obs_sum.ln();
    let m_prop = propagated.len() as f64;
    let ln_m_prior = (prior.len() as f64).ln();

    let mut cross = 0.0;
    let mut row = Vec::with_capacity(prior.len());
    for (next, &lo) in propagated.iter().zip(obs_loglik) {
        let w = (lo - log_obs_total).exp();
        if w == 0.0 || w.is_nan() {
            continue;
        }
        row.clear();
        row.extend(
            prior
                .particles()
                .iter()
                .map(|s| model.transition_logdensity(s, action, next)),
        );
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_pred = if mx == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln() - ln_m_prior
        };
        cross += w * (lo + log_pred);
    }
    Ok(log_obs_total - m_prop.ln() - cross)
}

/// Entropy estimate after applying `action` to `prior` and observing
/// `observation`, given the propagated particles.
pub fn boers_entropy<M: GenerativeModel>(
    model: &M,
    prior: &BeliefOf<M>,
    action: &M::Action,
    propagated: &[M::State],
    observation: &M::Observation,
) -> Result<f64, PomdpError> {
    let obs_loglik: Vec<f64> = propagated
        .iter()
        .map(|s| model.observation_logdensity(s, observation))
        .collect();
    boers_entropy_weighted(model, prior, action, propagated, &obs_loglik)
}
