//! IR-PFT: PFT-DPW that grafts well-visited subtrees from the previous
//! planning session under the root and re-weights them with an incremental
//! balance-heuristic MIS estimator.
//!
//! Reuse happens only at the root. When observation widening admits a new
//! child of a root action, the planner may instead attach the closest
//! candidate from the [`CandidatePool`]: the subtree is copied in, its
//! trajectories are extended to the current horizon, first-step rewards are
//! recomputed for the new root, and the simulation counter advances by the
//! candidate's visit count. Root actions with reused children take their Q
//! value from the MIS estimator; all other nodes keep running means.
//!
//! Simulations that revisit a reused child are counted as further draws from
//! that child's origin distribution. Since the tree policy changes between
//! simulations, the estimator is a heuristic rather than an unbiased one.

pub mod fill;

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mis::{BatchSample, DistId, EntryId, MisAccumulator, ProposalSet};
use crate::pft::search::{plan_with_hook, RootHook, SearchCtx};
use crate::pft::tree::{ActionId, PropId};
use crate::pft::{pft_plan, OutcomeOf, PlanStats, PlannerConfig, TreeOf};
use crate::pomdp::{
    evaluate_reward, pf_step, propagate, propagated_log_likelihood, BeliefOf, GenerativeModel,
    ParticleBelief, PomdpError,
};
use crate::reuse::candidates::CandidatePool;
pub use fill::{fill_horizon, FillReport};

/// Distribution id of samples generated from the current root and action.
pub const TARGET: DistId = DistId(0);

pub type PoolOf<M> = CandidatePool<
    <M as GenerativeModel>::State,
    <M as GenerativeModel>::Action,
    <M as GenerativeModel>::Observation,
>;

/// Reuse gate: only at the root, only while reused children make up at most
/// half of the action's children, and only if a candidate is available.
pub fn should_reuse(is_root: bool, reused: u64, total: u64, has_candidates: bool) -> bool {
    is_root && 2 * reused <= total && has_candidates
}

/// Proposal distribution of reused samples: the previous-session
/// (belief, action) node they were generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Origin<S, A> {
    pub dist: DistId,
    pub belief: ParticleBelief<S>,
    pub action: A,
}

/// MIS bookkeeping of one root action that received reused children.
#[derive(Debug, Clone)]
pub struct RootEstimator<S, A> {
    pub action: ActionId,
    pub acc: MisAccumulator<PropId>,
    pub origins: Vec<Origin<S, A>>,
    pub entries: HashMap<PropId, EntryId>,
}

pub type EstimatorOf<M> = RootEstimator<<M as GenerativeModel>::State, <M as GenerativeModel>::Action>;

struct RootProposals<'a, M: GenerativeModel> {
    model: &'a M,
    tree: &'a TreeOf<M>,
    origins: &'a [Origin<M::State, M::Action>],
}

impl<M: GenerativeModel> ProposalSet<PropId> for RootProposals<'_, M> {
    fn log_density(&self, dist: DistId, x: &PropId) -> Option<f64> {
        let o = self.origins.iter().find(|o| o.dist == dist)?;
        Some(
            propagated_log_likelihood(self.model, &o.belief, &o.action, &self.tree.prop(*x).belief)
                .unwrap_or(f64::NEG_INFINITY),
        )
    }
}

fn root_log_likelihood<M: GenerativeModel>(tree: &TreeOf<M>, model: &M, action: ActionId, prop: PropId) -> f64 {
    propagated_log_likelihood(
        model,
        &tree.belief(tree.root()).belief,
        &tree.action(action).action,
        &tree.prop(prop).belief,
    )
    .unwrap_or(f64::NEG_INFINITY)
}

struct ReuseHook<'p, M: GenerativeModel> {
    pool: &'p mut PoolOf<M>,
    estimators: Vec<EstimatorOf<M>>,
}

impl<M: GenerativeModel> ReuseHook<'_, M> {
    fn estimator_index(&self, action: ActionId) -> Option<usize> {
        self.estimators.iter().position(|e| e.action == action)
    }
}

impl<M: GenerativeModel> RootHook<M> for ReuseHook<'_, M> {
    fn try_reuse<R: Rng + ?Sized>(
        &mut self,
        ctx: &mut SearchCtx<'_, M, R>,
        a: ActionId,
        depth: u32,
    ) -> Option<(f64, u64)> {
        let root = ctx.tree.root();
        let an = ctx.tree.action(a);
        if !should_reuse(
            true,
            an.reused_children,
            an.children.len() as u64,
            !self.pool.is_empty(),
        ) {
            return None;
        }
        let candidate = self
            .pool
            .take_closest(ctx.model, &ctx.tree.belief(root).belief, &an.action)
            .ok()?;
        let src = self.pool.tree()?;
        let target = propagated_log_likelihood(
            ctx.model,
            &ctx.tree.belief(root).belief,
            &an.action,
            &src.prop(candidate.prop).belief,
        )
        .unwrap_or(f64::NEG_INFINITY);
        if !(target > f64::NEG_INFINITY) {
            // The current root cannot generate this propagated belief.
            ctx.stats.discarded += 1;
            return None;
        }
        let origin_node = src.action(candidate.origin);
        let origin = Origin {
            dist: DistId(1 + candidate.origin.0 as u64),
            belief: src.belief(origin_node.parent).belief.clone(),
            action: origin_node.action.clone(),
        };

        let new = ctx.tree.graft(src, candidate.prop, a);
        let delta = depth.saturating_sub(candidate.horizon_depth);
        let report = fill_horizon(&mut ctx.tree, new, delta, ctx.cfg, ctx.model, ctx.rng);
        ctx.stats.fill_nodes += report.nodes_added;
        ctx.stats.fill_reward_calls += report.reward_calls;
        ctx.stats.reward_calls += report.reward_calls;
        for pid in ctx.tree.subtree_props(new) {
            ctx.tree.prop_mut(pid).belief.horizon_depth += delta;
        }

        // First-step rewards are re-evaluated from the new root.
        let fresh_rewards: Vec<f64> = {
            let tree = &ctx.tree;
            let prop = tree.prop(new);
            prop.edges
                .iter()
                .map(|e| {
                    evaluate_reward(
                        ctx.model,
                        &tree.belief(root).belief,
                        &tree.action(a).action,
                        &prop.belief,
                        &e.observation,
                        &tree.belief(e.posterior).belief,
                    )
                })
                .collect()
        };
        ctx.stats.reward_calls += fresh_rewards.len() as u64;
        let prop = ctx.tree.prop_mut(new);
        let mut shift = 0.0;
        for (e, r_new) in prop.edges.iter_mut().zip(fresh_rewards) {
            let d = e.visits as f64 * (r_new - e.reward);
            e.return_sum += d;
            e.reward = r_new;
            shift += d;
        }
        prop.return_sum += shift;
        let visits = prop.n;
        let f = prop.return_sum;

        let idx = match self.estimator_index(a) {
            Some(i) => i,
            None => {
                self.estimators.push(RootEstimator {
                    action: a,
                    acc: MisAccumulator::new(Some(TARGET)),
                    origins: Vec::new(),
                    entries: HashMap::new(),
                });
                let est = self.estimators.last_mut().expect("just pushed");
                // Children simulated so far all came from the root itself.
                let existing: Vec<PropId> = ctx
                    .tree
                    .action(a)
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| c != new)
                    .collect();
                if !existing.is_empty() {
                    let batch = existing
                        .iter()
                        .map(|&c| BatchSample::New {
                            x: c,
                            f: ctx.tree.prop(c).return_sum,
                            target_logdensity: root_log_likelihood(&ctx.tree, ctx.model, a, c),
                            count: ctx.tree.prop(c).n,
                        })
                        .collect();
                    let proposals = RootProposals {
                        model: ctx.model,
                        tree: &ctx.tree,
                        origins: &est.origins,
                    };
                    est.acc
                        .add_batch(TARGET, batch, &proposals)
                        .expect("target samples need no evaluator");
                    ctx.stats.density_evals += est.acc.telemetry().last_call_evals;
                    for (i, c) in existing.into_iter().enumerate() {
                        est.entries.insert(c, EntryId(i));
                    }
                }
                self.estimators.len() - 1
            }
        };
        let est = &mut self.estimators[idx];
        if !est.origins.iter().any(|o| o.dist == origin.dist) {
            est.origins.push(origin.clone());
        }
        let proposals = RootProposals {
            model: ctx.model,
            tree: &ctx.tree,
            origins: &est.origins,
        };
        let q = est
            .acc
            .add_batch(
                origin.dist,
                vec![BatchSample::New {
                    x: new,
                    f,
                    target_logdensity: target,
                    count: visits,
                }],
                &proposals,
            )
            .expect("origin registered above");
        ctx.stats.density_evals += est.acc.telemetry().last_call_evals;
        est.entries.insert(new, EntryId(est.acc.entries().len() - 1));

        ctx.tree.belief_mut(root).n += visits;
        let an = ctx.tree.action_mut(a);
        an.n += visits;
        an.q = q;
        ctx.stats.reused += 1;
        ctx.stats.reused_visits += visits;
        Some((q, visits))
    }

    fn after_backup<R: Rng + ?Sized>(
        &mut self,
        ctx: &mut SearchCtx<'_, M, R>,
        a: ActionId,
        prop: PropId,
        created: bool,
        total: f64,
    ) {
        let Some(idx) = self.estimator_index(a) else {
            return;
        };
        let est = &mut self.estimators[idx];
        let proposals = RootProposals {
            model: ctx.model,
            tree: &ctx.tree,
            origins: &est.origins,
        };
        let (origin, sample) = if created {
            let target = root_log_likelihood(&ctx.tree, ctx.model, a, prop);
            (
                TARGET,
                BatchSample::New {
                    x: prop,
                    f: total,
                    target_logdensity: target,
                    count: 1,
                },
            )
        } else {
            let entry = est.entries[&prop];
            let origin = est.acc.entry(entry).expect("entry exists").origin;
            (origin, BatchSample::Repeat { entry, f: total })
        };
        let q = est
            .acc
            .add_batch(origin, vec![sample], &proposals)
            .expect("all origins registered");
        ctx.stats.density_evals += est.acc.telemetry().last_call_evals;
        if created {
            est.entries.insert(prop, EntryId(est.acc.entries().len() - 1));
        }
        ctx.tree.action_mut(a).q = q;
    }
}

/// Result of an IR-PFT planning session.
#[derive(Debug, Clone)]
pub struct IrPftOutcome<S, A, O> {
    pub plan: crate::pft::PlanOutcome<S, A, O>,
    /// Estimators of the root actions that received reused children.
    pub estimators: Vec<RootEstimator<S, A>>,
}

pub type IrOutcomeOf<M> = IrPftOutcome<
    <M as GenerativeModel>::State,
    <M as GenerativeModel>::Action,
    <M as GenerativeModel>::Observation,
>;

/// Plan from `b`, drawing reuse candidates from `pool`. Candidates used in
/// this session are removed from the pool.
pub fn irpft_plan<M: GenerativeModel, R: Rng + ?Sized>(
    b: &BeliefOf<M>,
    pool: &mut PoolOf<M>,
    cfg: &PlannerConfig,
    model: &M,
    rng: &mut R,
) -> IrOutcomeOf<M> {
    let mut hook = ReuseHook {
        pool,
        estimators: Vec::new(),
    };
    let plan = plan_with_hook(b.clone(), cfg, model, &mut hook, rng);
    IrPftOutcome {
        plan,
        estimators: hook.estimators,
    }
}

/// Which planner drives an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    Pft,
    IrPft,
}

impl Planner {
    pub fn name(self) -> &'static str {
        match self {
            Planner::Pft => "pft",
            Planner::IrPft => "irpft",
        }
    }

    pub fn plan<M: GenerativeModel, R: Rng + ?Sized>(
        self,
        b: &BeliefOf<M>,
        pool: &mut PoolOf<M>,
        cfg: &PlannerConfig,
        model: &M,
        rng: &mut R,
    ) -> OutcomeOf<M> {
        match self {
            Planner::Pft => pft_plan(b, cfg, model, rng),
            Planner::IrPft => irpft_plan(b, pool, cfg, model, rng).plan,
        }
    }
}

impl std::str::FromStr for Planner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pft" => Ok(Planner::Pft),
            "irpft" => Ok(Planner::IrPft),
            other => Err(format!("unknown planner '{other}' (expected pft or irpft)")),
        }
    }
}

/// Source of real observations for executed actions.
pub trait Environment<M: GenerativeModel> {
    fn execute(&mut self, action: &M::Action) -> M::Observation;
}

/// Environment that simulates the true state with the model itself.
pub struct SimulatedEnv<'m, M: GenerativeModel, R> {
    model: &'m M,
    state: M::State,
    rng: R,
}

impl<'m, M: GenerativeModel, R: Rng> SimulatedEnv<'m, M, R> {
    pub fn new(model: &'m M, state: M::State, rng: R) -> Self {
        Self { model, state, rng }
    }

    pub fn state(&self) -> &M::State {
        &self.state
    }
}

impl<M: GenerativeModel, R: Rng> Environment<M> for SimulatedEnv<'_, M, R> {
    fn execute(&mut self, action: &M::Action) -> M::Observation {
        self.state = self.model.sample_transition(&self.state, action, &mut self.rng);
        self.model.sample_observation(&self.state, &mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace<A, O> {
    pub action: A,
    pub observation: O,
    pub reward: f64,
    pub stats: PlanStats,
    /// Wall time of the planning call alone.
    pub plan_nanos: u64,
    /// Candidates available when planning started.
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<A, O> {
    pub steps: Vec<StepTrace<A, O>>,
    pub reached_terminal: bool,
    pub total_reward: f64,
}

pub type TraceOf<M> = EpisodeTrace<<M as GenerativeModel>::Action, <M as GenerativeModel>::Observation>;

/// Plan, act, observe and filter until the belief is terminal or `max_steps`
/// actions were taken. After each IR-PFT session the pool is refreshed from
/// that session's tree. Planning draws from `rng`, belief updates with real
/// observations from `filter_rng`.
#[allow(clippy::too_many_arguments)]
pub fn solve_loop<M, E, R, F>(
    b0: &BeliefOf<M>,
    pool: &mut PoolOf<M>,
    cfg: &PlannerConfig,
    model: &M,
    env: &mut E,
    planner: Planner,
    max_steps: u32,
    rng: &mut R,
    filter_rng: &mut F,
) -> TraceOf<M>
where
    M: GenerativeModel,
    E: Environment<M>,
    R: Rng + ?Sized,
    F: Rng + ?Sized,
{
    let mut b = b0.clone();
    let mut steps = Vec::new();
    let mut total_reward = 0.0;
    while !model.is_terminal(&b) && (steps.len() as u32) < max_steps {
        let candidates = pool.len();
        let start = Instant::now();
        let outcome = planner.plan(&b, pool, cfg, model, rng);
        let plan_nanos = start.elapsed().as_nanos() as u64;
        let action = outcome.action.clone();
        let observation = env.execute(&action);
        let (posterior, reward) = filter_real(model, &b, &action, &observation, filter_rng);
        if planner == Planner::IrPft {
            pool.refresh(outcome.tree, &action, cfg.n_min);
        }
        total_reward += reward;
        steps.push(StepTrace {
            action,
            observation,
            reward,
            stats: outcome.stats,
            plan_nanos,
            candidates,
        });
        b = posterior;
    }
    EpisodeTrace {
        reached_terminal: model.is_terminal(&b),
        steps,
        total_reward,
    }
}

/// Belief update with a real observation. If no particle explains the
/// observation, the propagated particles are kept unweighted.
fn filter_real<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    b: &BeliefOf<M>,
    a: &M::Action,
    o: &M::Observation,
    rng: &mut R,
) -> (BeliefOf<M>, f64) {
    match pf_step(model, b, a, Some(o.clone()), rng) {
        Ok(out) => (out.posterior, out.reward),
        Err(PomdpError::AllWeightsZero) | Err(_) => {
            let prop = propagate(model, b, a, rng);
            let posterior =
                ParticleBelief::new(prop.particles().to_vec()).expect("same particle count");
            let reward = evaluate_reward(model, b, a, &prop, o, &posterior);
            (posterior, reward)
        }
    }
}
