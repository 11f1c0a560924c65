//! Independent oracles for the estimator, filter and planner guarantees.
//!
//! Every check recomputes its reference from first principles (direct density
//! formulas, closed-form Kalman quantities, from-scratch sums) instead of
//! calling the code under test a second time. Each returns a one-line detail
//! on success and a description of the first violation on failure. The
//! acceptance harness of the benchmark crate includes this file as well.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use irpft::irpft::{fill_horizon, irpft_plan, RootEstimator, TARGET};
use irpft::lightdark::{LightDark, LightDarkConfig};
use irpft::mis::{BatchSample, DistId, EntryId, MisAccumulator, ProposalRegistry};
use irpft::models::LinearGaussian;
use irpft::pft::tree::PropId;
use irpft::pomdp::{evaluate_reward, propagate, PfOutcome};
use irpft::reuse::{q_mis_experience, q_simple_reuse, suffix_log_weight, SuffixStep, TrajectoryRecord};
use irpft::{
    pf_step, pft_plan, CandidatePool, GenerativeModel, ParticleBelief, PlannerConfig, PropagatedBelief,
    SearchTree,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Isotropic Gaussian log-density written out directly.
pub fn ln_normal(x: &[f64], mu: &[f64], sigma: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * d * (2.0 * PI * sigma * sigma).ln() - sq / (2.0 * sigma * sigma)
}

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Incremental balance-heuristic MIS

/// 1D Gaussian proposal `N(mu, sigma²)`.
#[derive(Debug, Clone, Copy)]
pub struct Gauss1 {
    pub mu: f64,
    pub sigma: f64,
}

impl Gauss1 {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.mu + self.sigma * gauss(rng)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        normal_pdf(x, self.mu, self.sigma)
    }
}

const TARGET_P: Gauss1 = Gauss1 { mu: 0.0, sigma: 1.0 };

fn integrand(x: f64) -> f64 {
    1.0 + x * x
}

/// A randomized accumulator plus the flat list of draws it represents.
pub struct MisScenario {
    pub proposals: Vec<Gauss1>,
    pub acc: MisAccumulator<f64>,
    /// `(x, f, origin index)` for every draw, repeats included.
    pub draws: Vec<(f64, f64, usize)>,
    pub max_rel_err: f64,
    /// Largest ratio of per-call evaluations to `2·(N_prev + M·L)`.
    pub max_eval_ratio: f64,
    pub calls: usize,
}

fn registry(proposals: &[Gauss1]) -> ProposalRegistry<'static, f64> {
    let mut reg = ProposalRegistry::new();
    for (j, q) in proposals.iter().copied().enumerate() {
        reg.register(DistId(j as u64), move |x: &f64| q.pdf(*x).ln());
    }
    reg
}

/// From-scratch balance-heuristic estimate `Σ_draws p(x) f / Σⱼ nⱼ qⱼ(x)`.
pub fn mis_from_scratch(proposals: &[Gauss1], draws: &[(f64, f64, usize)]) -> f64 {
    let mut counts = vec![0u64; proposals.len()];
    for d in draws {
        counts[d.2] += 1;
    }
    draws
        .iter()
        .map(|&(x, f, _)| {
            let denom: f64 = proposals
                .iter()
                .zip(&counts)
                .map(|(q, &n)| n as f64 * q.pdf(x))
                .sum();
            TARGET_P.pdf(x) / denom * f
        })
        .sum()
}

/// Random sequence of `add_batch` calls over up to five Gaussian proposals,
/// checked against the from-scratch estimate after every call.
pub fn random_mis_scenario(seed: u64) -> MisScenario {
    let mut r = rng(seed);
    let m = r.random_range(1..=5usize);
    let target_is_proposal = r.random_bool(0.5);
    let proposals: Vec<Gauss1> = (0..m)
        .map(|j| {
            if j == 0 && target_is_proposal {
                TARGET_P
            } else {
                Gauss1 {
                    mu: r.random_range(-2.0..2.0),
                    sigma: r.random_range(0.5..2.0),
                }
            }
        })
        .collect();
    let reg = registry(&proposals);
    let mut acc = MisAccumulator::new(target_is_proposal.then_some(DistId(0)));
    let mut draws = Vec::new();
    let mut entry_origin: Vec<usize> = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    let mut max_eval_ratio: f64 = 0.0;
    let calls = r.random_range(5..=20usize);
    for _ in 0..calls {
        let j = r.random_range(0..m);
        let len = r.random_range(1..=50usize);
        let own: Vec<usize> = (0..entry_origin.len()).filter(|&e| entry_origin[e] == j).collect();
        let mut batch = Vec::with_capacity(len);
        let mut added = 0u64;
        for _ in 0..len {
            if !own.is_empty() && r.random_bool(0.2) {
                let e = own[r.random_range(0..own.len())];
                let x = acc.entries()[e].x;
                batch.push(BatchSample::Repeat {
                    entry: EntryId(e),
                    f: integrand(x),
                });
                draws.push((x, integrand(x), j));
                added += 1;
            } else {
                let x = proposals[j].sample(&mut r);
                let count = if r.random_bool(0.1) { r.random_range(2..=3u64) } else { 1 };
                batch.push(BatchSample::New {
                    x,
                    f: count as f64 * integrand(x),
                    target_logdensity: TARGET_P.pdf(x).ln(),
                    count,
                });
                for _ in 0..count {
                    draws.push((x, integrand(x), j));
                }
                added += count;
            }
        }
        let n_prev = acc.entries().len() as f64;
        let new_entries = batch
            .iter()
            .filter(|s| matches!(s, BatchSample::New { .. }))
            .count();
        let est = acc.add_batch(DistId(j as u64), batch, &reg).expect("registered");
        entry_origin.extend(std::iter::repeat_n(j, new_entries));
        let reference = mis_from_scratch(&proposals, &draws);
        max_rel_err = max_rel_err.max(rel_err(est, reference));
        let m_now = acc.distributions().len() as f64;
        let bound = 2.0 * (n_prev + m_now * added as f64);
        max_eval_ratio = max_eval_ratio.max(acc.telemetry().last_call_evals as f64 / bound);
    }
    MisScenario {
        proposals,
        acc,
        draws,
        max_rel_err,
        max_eval_ratio,
        calls,
    }
}

/// Incremental estimate equals the from-scratch formula after every call, and
/// each call's density evaluations stay within `2·(M·n_avg + M·L)`.
pub fn mis_incremental_oracle(sequences: u64) -> Check {
    let mut worst_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut calls = 0;
    for s in 0..sequences {
        let sc = random_mis_scenario(1000 + s);
        calls += sc.calls;
        worst_err = worst_err.max(sc.max_rel_err);
        worst_ratio = worst_ratio.max(sc.max_eval_ratio);
        if sc.max_rel_err > 1e-9 {
            return Err(format!("sequence {s}: relative error {:.3e}", sc.max_rel_err));
        }
        if sc.max_eval_ratio > 1.0 {
            return Err(format!(
                "sequence {s}: evaluations reach {:.2} of the bound",
                sc.max_eval_ratio
            ));
        }
    }
    Ok(format!(
        "{sequences} sequences, {calls} calls, max rel err {worst_err:.2e}, max evals/bound {worst_ratio:.2}"
    ))
}

/// Balance-heuristic weights of every entry sum to one over distributions.
pub fn mis_partition_oracle(accumulators: u64) -> Check {
    let mut worst: f64 = 0.0;
    for s in 0..accumulators {
        let sc = random_mis_scenario(5000 + s);
        let reg = registry(&sc.proposals);
        for e in 0..sc.acc.entries().len() {
            let w = sc.acc.balance_weights(EntryId(e), &reg).expect("entry exists");
            let sum: f64 = w.iter().map(|(_, v)| v).sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("weights sum deviates from 1 by {worst:.3e}"));
    }
    Ok(format!("{accumulators} accumulators, max |Σw − 1| = {worst:.2e}"))
}

/// With `f ≡ 1` the estimate is an unbiased estimate of `∫p = 1`.
pub fn mis_normalization_oracle(samples: usize, seed: u64) -> Check {
    let proposals = [
        Gauss1 { mu: -1.0, sigma: 1.0 },
        Gauss1 { mu: 0.5, sigma: 1.5 },
        Gauss1 { mu: 2.0, sigma: 2.0 },
    ];
    let reg = registry(&proposals);
    let mut r = rng(seed);
    let mut acc = MisAccumulator::new(None);
    let mut xs = Vec::with_capacity(samples);
    let per = samples / proposals.len();
    for (j, q) in proposals.iter().enumerate() {
        let n = if j + 1 == proposals.len() { samples - per * j } else { per };
        let batch = (0..n)
            .map(|_| {
                let x = q.sample(&mut r);
                xs.push(x);
                BatchSample::New {
                    x,
                    f: 1.0,
                    target_logdensity: TARGET_P.pdf(x).ln(),
                    count: 1,
                }
            })
            .collect();
        acc.add_batch(DistId(j as u64), batch, &reg).expect("registered");
    }
    let est = acc.mis_estimate().expect("nonempty");
    // Standard error from the per-draw terms N·p(x)/Σⱼ nⱼqⱼ(x).
    let counts: Vec<f64> = (0..proposals.len())
        .map(|j| if j + 1 == proposals.len() { (samples - per * j) as f64 } else { per as f64 })
        .collect();
    let n = samples as f64;
    let terms: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let denom: f64 = proposals.iter().zip(&counts).map(|(q, c)| c * q.pdf(x)).sum();
            n * TARGET_P.pdf(x) / denom
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = (var / n).sqrt();
    let z = (est - 1.0) / sigma;
    if z.abs() > 3.0 {
        return Err(format!("estimate {est:.6} is {z:.2}σ from 1 (σ = {sigma:.2e})"));
    }
    Ok(format!("{samples} samples: estimate {est:.6}, {z:+.2}σ from 1"))
}

// ---------------------------------------------------------------------------
// Suffix re-weighting

pub type Lg2 = LinearGaussian<2>;
pub type Rec2 = TrajectoryRecord<[f64; 2], [f64; 2], [f64; 2]>;

fn random_belief<R: Rng>(r: &mut R, m: usize, spread: f64) -> ParticleBelief<[f64; 2]> {
    ParticleBelief::new(
        (0..m)
            .map(|_| [spread * gauss(r), spread * gauss(r)])
            .collect(),
    )
    .unwrap()
}

fn jitter<R: Rng>(r: &mut R, b: &ParticleBelief<[f64; 2]>, s: f64) -> ParticleBelief<[f64; 2]> {
    ParticleBelief::new(
        b.particles()
            .iter()
            .map(|p| [p[0] + s * gauss(r), p[1] + s * gauss(r)])
            .collect(),
    )
    .unwrap()
}

pub type Suffix2 = Vec<SuffixStep<[f64; 2], [f64; 2], [f64; 2]>>;

/// Simulate a `d`-step suffix from `(b, a)`; later actions are drawn uniformly.
pub fn simulate_suffix<R: Rng>(
    model: &Lg2,
    actions: &[[f64; 2]],
    b: &ParticleBelief<[f64; 2]>,
    a: [f64; 2],
    d: usize,
    r: &mut R,
) -> (Suffix2, Vec<f64>) {
    let mut steps = Vec::with_capacity(d);
    let mut rewards = Vec::with_capacity(d);
    let mut belief = b.clone();
    let mut action = a;
    for i in 0..d {
        let PfOutcome {
            posterior,
            propagated,
            observation,
            reward,
        } = pf_step(model, &belief, &action, None, r).expect("Gaussian likelihoods are positive");
        let next = (i + 1 < d).then(|| actions[r.random_range(0..actions.len())]);
        steps.push(SuffixStep {
            propagated,
            observation,
            posterior: posterior.clone(),
            action: next,
        });
        rewards.push(reward);
        belief = posterior;
        if let Some(n) = next {
            action = n;
        }
    }
    (steps, rewards)
}

/// Log-density of a whole suffix given its starting (belief, action), built
/// from every factor of the chain: propagation, observation, resampling and
/// the uniform policy over `n_actions`.
pub fn chain_log_density(
    model: &Lg2,
    n_actions: usize,
    b: &ParticleBelief<[f64; 2]>,
    a: [f64; 2],
    suffix: &[SuffixStep<[f64; 2], [f64; 2], [f64; 2]>],
) -> f64 {
    let mut total = 0.0;
    let mut belief = b.clone();
    let mut action = a;
    for step in suffix {
        let m = belief.len() as f64;
        // Propagation: particles paired by index.
        total -= m.ln();
        for (s, next) in belief.particles().iter().zip(step.propagated.particles()) {
            let mode = [s[0] + action[0], s[1] + action[1]];
            total += ln_normal(next, &mode, model.process_std);
        }
        // Observation drawn from a uniformly chosen propagated particle.
        let lik: Vec<f64> = step
            .propagated
            .particles()
            .iter()
            .map(|s| ln_normal(&step.observation, s, model.obs_std).exp())
            .collect();
        total += (lik.iter().sum::<f64>() / m).ln();
        // Resampled posterior: each draw picks its propagated particle with
        // probability proportional to its likelihood.
        let z: f64 = lik.iter().sum();
        for p in step.posterior.particles() {
            let i = step
                .propagated
                .particles()
                .iter()
                .position(|q| q == p)
                .expect("posterior particles come from the propagated set");
            total += (lik[i] / z).ln();
        }
        if let Some(next) = step.action {
            total -= (n_actions as f64).ln();
            action = next;
        }
        belief = step.posterior.clone();
    }
    total
}

/// `suffix_log_weight` equals the full-chain log-density ratio.
pub fn suffix_weight_oracle(instances: u64) -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let mut r = rng(9000 + k);
        let m = r.random_range(1..=3usize);
        let d = r.random_range(1..=3usize);
        let model = Lg2::new(r.random_range(0.3..1.0), r.random_range(0.3..1.0));
        let actions: Vec<[f64; 2]> = (0..3)
            .map(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
            .collect();
        let model = model.with_actions(actions.clone());
        let b_origin = random_belief(&mut r, m, 1.0);
        let a_origin = actions[r.random_range(0..3)];
        let b_k = jitter(&mut r, &b_origin, 0.3);
        let a_k = actions[r.random_range(0..3)];
        let (suffix, rewards) = simulate_suffix(&model, &actions, &b_origin, a_origin, d, &mut r);
        let reference = chain_log_density(&model, actions.len(), &b_k, a_k, &suffix)
            - chain_log_density(&model, actions.len(), &b_origin, a_origin, &suffix);
        let record =
            Rec2::new(DistId(1), 0, b_origin.clone(), a_origin, suffix, rewards).expect("valid");
        let got = suffix_log_weight(&model, &b_k, &a_k, &record).expect("finite");
        let err = (got - reference).abs();
        worst = worst.max(err);
        if err > 1e-9 {
            return Err(format!(
                "instance {k} (m={m}, d={d}): weight {got} vs chain ratio {reference}"
            ));
        }
        let same = suffix_log_weight(&model, &b_origin, &a_origin, &record).expect("finite");
        if same != 0.0 {
            return Err(format!("instance {k}: weight at the origin is {same}, not 0"));
        }
    }
    Ok(format!("{instances} instances, max |Δ log w| = {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Experience-based estimation

/// Records from three origins; each origin contributes groups of one or two
/// records sharing a first propagated belief.
pub fn experience_dataset(seed: u64) -> (Lg2, ParticleBelief<[f64; 2]>, [f64; 2], Vec<Rec2>) {
    let mut r = rng(seed);
    let actions = vec![[0.5, 0.0], [0.0, 0.5], [-0.3, 0.2]];
    let model = Lg2::new(0.6, 0.5)
        .with_actions(actions.clone())
        .with_target([2.0, 1.0]);
    let base = random_belief(&mut r, 3, 1.0);
    let b_k = jitter(&mut r, &base, 0.2);
    let a_k = actions[0];
    let mut records = Vec::new();
    let mut group = 0;
    for origin in 0..3u64 {
        let b_o = jitter(&mut r, &base, 0.2);
        let a_o = actions[origin as usize];
        for _ in 0..r.random_range(2..=4) {
            let propagated = propagate(&model, &b_o, &a_o, &mut r);
            let size = r.random_range(1..=2);
            for _ in 0..size {
                let (mut suffix, mut rewards) = (Vec::new(), Vec::new());
                let o = model.sample_observation(
                    &propagated.particles()[r.random_range(0..3)],
                    &mut r,
                );
                let step = irpft::pomdp::update(&model, &b_o, &a_o, propagated.clone(), o, &mut r)
                    .expect("positive likelihood");
                let d = 3;
                let next = actions[r.random_range(0..3)];
                suffix.push(SuffixStep {
                    propagated: step.propagated,
                    observation: step.observation,
                    posterior: step.posterior.clone(),
                    action: Some(next),
                });
                rewards.push(step.reward);
                let (rest, rest_rewards) =
                    simulate_suffix(&model, &actions, &step.posterior, next, d - 1, &mut r);
                suffix.extend(rest);
                rewards.extend(rest_rewards);
                records.push(
                    Rec2::new(DistId(10 + origin), group, b_o.clone(), a_o, suffix, rewards)
                        .expect("valid"),
                );
            }
            group += 1;
        }
    }
    (model, b_k, a_k, records)
}

/// Per-trajectory form: `Σᵢ P(b⁻ᵢ|b,a)/Σⱼ nⱼ P(b⁻ᵢ|bⱼ,aⱼ) · G̃ᵢ` with `nⱼ` the
/// record count of origin `j`, densities written out directly.
pub fn q_ungrouped(model: &Lg2, b_k: &ParticleBelief<[f64; 2]>, a_k: [f64; 2], records: &[Rec2]) -> f64 {
    let ln_prop = |b: &ParticleBelief<[f64; 2]>, a: [f64; 2], x: &PropagatedBelief<[f64; 2]>| {
        let mut t = -(b.len() as f64).ln();
        for (s, n) in b.particles().iter().zip(x.particles()) {
            t += ln_normal(n, &[s[0] + a[0], s[1] + a[1]], model.process_std);
        }
        t
    };
    let mut origins: Vec<(DistId, &Rec2, f64)> = Vec::new();
    for r in records {
        match origins.iter_mut().find(|o| o.0 == r.origin) {
            Some(o) => o.2 += 1.0,
            None => origins.push((r.origin, r, 1.0)),
        }
    }
    records
        .iter()
        .map(|r| {
            let x = &r.suffix[0].propagated;
            let p = ln_prop(b_k, a_k, x).exp();
            let denom: f64 = origins
                .iter()
                .map(|(_, o, n)| n * ln_prop(&o.origin_belief, o.origin_action, x).exp())
                .sum();
            let first = &r.suffix[0];
            let r_new = evaluate_reward(
                model,
                b_k,
                &a_k,
                &first.propagated,
                &first.observation,
                &first.posterior,
            );
            let g_tilde = r.step_rewards.iter().skip(1).sum::<f64>() + r_new;
            p / denom * g_tilde
        })
        .sum()
}

/// Grouped MIS estimate matches the per-trajectory formula on three origins
/// and collapses to the mean return when every record starts at the query.
pub fn experience_oracle(datasets: u64) -> Check {
    let mut worst: f64 = 0.0;
    for s in 0..datasets {
        let (model, b_k, a_k, records) = experience_dataset(300 + s);
        let got = q_mis_experience(&model, &b_k, &a_k, &records).map_err(|e| e.to_string())?;
        let want = q_ungrouped(&model, &b_k, a_k, &records);
        let err = rel_err(got, want);
        worst = worst.max(err);
        if err > 1e-9 {
            return Err(format!("dataset {s}: grouped {got} vs ungrouped {want}"));
        }
    }
    let mut collapse: f64 = 0.0;
    for s in 0..datasets {
        let mut r = rng(700 + s);
        let actions = vec![[0.5, 0.0], [0.0, 0.5]];
        let model = Lg2::new(0.6, 0.5).with_actions(actions.clone());
        let b = random_belief(&mut r, 3, 1.0);
        let a = actions[1];
        let records: Vec<Rec2> = (0..6)
            .map(|g| {
                let (suffix, rewards) = simulate_suffix(&model, &actions, &b, a, 3, &mut r);
                Rec2::new(DistId(4), g, b.clone(), a, suffix, rewards).expect("valid")
            })
            .collect();
        let mis = q_mis_experience(&model, &b, &a, &records).map_err(|e| e.to_string())?;
        let simple = q_simple_reuse(&records).map_err(|e| e.to_string())?;
        let err = rel_err(mis, simple);
        collapse = collapse.max(err);
        if err > 1e-9 {
            return Err(format!("single origin {s}: MIS {mis} vs mean return {simple}"));
        }
    }
    Ok(format!(
        "{datasets} three-origin datasets (max rel err {worst:.2e}); single-origin collapse max rel err {collapse:.2e}"
    ))
}

// ---------------------------------------------------------------------------
// Entropy estimate against the Kalman posterior

/// Boers estimate for a 2D linear-Gaussian step versus
/// `½ ln((2πe)² |Σ|)` of the exact Kalman posterior.
///
/// The posterior covariance does not depend on the observed value, so each
/// seed observes a typical innovation: one predictive standard deviation from
/// the predicted mean in a random direction. Fully random observations are
/// checked in aggregate, since tail observations leave few effective
/// particles and a larger finite-m error.
pub fn boers_kalman_oracle(seeds: u64, m: usize) -> Check {
    let (prior_std, process_std, obs_std) = (1.0, 0.5, 0.5);
    let model = Lg2::new(process_std, obs_std).with_actions(vec![[0.3, -0.2]]);
    let a = [0.3, -0.2];
    let pred_var = prior_std * prior_std + process_std * process_std;
    let post_var = pred_var * obs_std * obs_std / (pred_var + obs_std * obs_std);
    let exact = (2.0 * PI * std::f64::consts::E * post_var).ln();
    let innovation_sd = (pred_var + obs_std * obs_std).sqrt();
    let mut worst: f64 = 0.0;
    let mut random_abs = 0.0;
    for s in 0..seeds {
        let mut r = rng(40 + s);
        let prior = random_belief(&mut r, m, prior_std);
        let truth = model.sample_transition(&[prior_std * gauss(&mut r), prior_std * gauss(&mut r)], &a, &mut r);
        let random_o = model.sample_observation(&truth, &mut r);
        let angle = r.random_range(0.0..2.0 * PI);
        let typical_o = [a[0] + innovation_sd * angle.cos(), a[1] + innovation_sd * angle.sin()];
        let propagated = propagate(&model, &prior, &a, &mut r);
        let estimate = |o: &[f64; 2]| {
            irpft::entropy::boers_entropy(&model, &prior, &a, propagated.particles(), o)
                .map_err(|e| e.to_string())
        };
        let h = estimate(&typical_o)?;
        let err = (h - exact).abs();
        worst = worst.max(err);
        if err > 0.15 {
            return Err(format!("seed {s}: estimate {h:.4} vs Kalman {exact:.4}"));
        }
        random_abs += (estimate(&random_o)? - exact).abs();
    }
    let random_mean = random_abs / seeds as f64;
    if random_mean > 0.15 {
        return Err(format!("random observations: mean |Ĥ − H| = {random_mean:.4}"));
    }
    Ok(format!(
        "{seeds} seeds, m={m}: max |Ĥ − H| = {worst:.4} nats (H = {exact:.4}); random observations mean |Ĥ − H| = {random_mean:.4}"
    ))
}

// ---------------------------------------------------------------------------
// Horizon filling

/// Filling every root subtree of a tree grown by `m_sim` simulations adds at
/// most `m_sim·Δd` filter steps and reward evaluations.
pub fn fill_bound_oracle(seeds: u64) -> Check {
    let model = LightDark::new(LightDarkConfig::default()).expect("valid");
    let mut cases = 0;
    let mut tightest: f64 = 0.0;
    for &m_sim in &[10u64, 50, 200] {
        for delta in 1..=3u32 {
            for s in 0..seeds {
                let mut r = rng(s * 1000 + m_sim * 10 + u64::from(delta));
                let b0 = model.initial_belief(8, &mut r);
                let cfg = PlannerConfig {
                    iterations: m_sim,
                    horizon: 5,
                    ..Default::default()
                };
                let out = pft_plan(&b0, &cfg, &model, &mut r);
                let mut tree = out.tree;
                let mut nodes = 0;
                let mut calls = 0;
                let roots: Vec<PropId> = root_props(&tree);
                for p in roots {
                    let rep = fill_horizon(&mut tree, p, delta, &cfg, &model, &mut r);
                    nodes += rep.nodes_added;
                    calls += rep.reward_calls;
                }
                let bound = m_sim * u64::from(delta);
                cases += 1;
                tightest = tightest.max(nodes as f64 / bound as f64);
                if nodes > bound || calls > bound {
                    return Err(format!(
                        "m_sim={m_sim} Δd={delta} seed {s}: {nodes} nodes, {calls} reward calls > {bound}"
                    ));
                }
                tree.check_counts()?;
            }
        }
    }
    Ok(format!("{cases} trees, max added/(m_sim·Δd) = {tightest:.3}"))
}

pub fn root_props<S: Clone, A: Clone, O: Clone>(tree: &SearchTree<S, A, O>) -> Vec<PropId> {
    tree.belief(tree.root())
        .actions
        .iter()
        .flat_map(|&a| tree.action(a).children.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Reduction to PFT-DPW

/// IR-PFT with no candidates builds exactly the PFT-DPW tree.
pub fn reduction_oracle(sessions: u64, m: usize) -> Check {
    let model = LightDark::new(LightDarkConfig::default()).expect("valid");
    let cfg = PlannerConfig::default();
    let mut nodes = 0;
    for s in 0..sessions {
        let mut init = rng(77 + s);
        // Spread sessions over the arena so trees differ in shape.
        let mut b = model.initial_belief(m, &mut init);
        for _ in 0..(s % 6) {
            b = pf_step(&model, &b, &[1.0, 0.0], None, &mut init)
                .map_err(|e| e.to_string())?
                .posterior;
        }
        let pft = pft_plan(&b, &cfg, &model, &mut rng(s));
        let mut pool = CandidatePool::new();
        let ir = irpft_plan(&b, &mut pool, &cfg, &model, &mut rng(s));
        if pft.tree != ir.plan.tree {
            return Err(format!("session {s}: trees differ"));
        }
        if pft.action != ir.plan.action || pft.stats != ir.plan.stats {
            return Err(format!("session {s}: action or statistics differ"));
        }
        if !ir.estimators.is_empty() {
            return Err(format!("session {s}: estimator created without candidates"));
        }
        nodes += pft.tree.belief_count();
    }
    Ok(format!("{sessions} sessions identical ({nodes} belief nodes compared)"))
}

// ---------------------------------------------------------------------------
// Root estimator

/// From-scratch grouped MIS value of one root action: every child is a sample
/// of its origin distribution with multiplicity `N(b⁻)` and integrand sum
/// equal to its stored return sum.
pub fn root_q_from_scratch<M: GenerativeModel>(
    model: &M,
    tree: &SearchTree<M::State, M::Action, M::Observation>,
    est: &RootEstimator<M::State, M::Action>,
) -> f64 {
    let root = tree.root();
    let a = tree.action(est.action);
    let ln_p = |b: &ParticleBelief<M::State>, act: &M::Action, x: PropId| {
        irpft::propagated_log_likelihood(model, b, act, &tree.prop(x).belief).unwrap()
    };
    let origin_of: HashMap<PropId, DistId> = est
        .entries
        .iter()
        .map(|(&p, &e)| (p, est.acc.entry(e).unwrap().origin))
        .collect();
    let mut counts: HashMap<DistId, f64> = HashMap::new();
    for &c in &a.children {
        *counts.entry(origin_of[&c]).or_default() += tree.prop(c).n as f64;
    }
    let root_b = &tree.belief(root).belief;
    a.children
        .iter()
        .map(|&c| {
            let p = ln_p(root_b, &a.action, c);
            // Denominator terms relative to p to stay in range.
            let denom: f64 = counts
                .iter()
                .map(|(&d, &n)| {
                    let q = if d == TARGET {
                        p
                    } else {
                        let o = est.origins.iter().find(|o| o.dist == d).unwrap();
                        ln_p(&o.belief, &o.action, c)
                    };
                    n * (q - p).exp()
                })
                .sum();
            tree.prop(c).return_sum / denom
        })
        .sum()
}
