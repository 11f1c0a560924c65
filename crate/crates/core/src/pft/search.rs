//! Simulation engine shared by PFT-DPW and the reuse planner.

use rand::Rng;

use super::tree::{ActionId, BeliefId, PropId};
use super::{rollout_from, OutcomeOf, PlanOutcome, PlanStats, PlannerConfig, TreeOf};
use crate::pomdp::{pf_step_with_retry, ActionSpace, BeliefOf, GenerativeModel};

/// Mutable state of one planning session.
pub struct SearchCtx<'a, M: GenerativeModel, R: ?Sized> {
    pub model: &'a M,
    pub cfg: &'a PlannerConfig,
    pub tree: TreeOf<M>,
    pub rng: &'a mut R,
    pub stats: PlanStats,
}

/// Extension points at the root of the search.
pub trait RootHook<M: GenerativeModel> {
    /// Called at the root when observation widening admits a new child of
    /// `action`. Returning `Some((value, advance))` means the hook attached a
    /// child itself and the simulation counter moves by `advance`.
    fn try_reuse<R: Rng + ?Sized>(
        &mut self,
        ctx: &mut SearchCtx<'_, M, R>,
        action: ActionId,
        depth: u32,
    ) -> Option<(f64, u64)>;

    /// Called after a root simulation through `prop` was backed up.
    fn after_backup<R: Rng + ?Sized>(
        &mut self,
        ctx: &mut SearchCtx<'_, M, R>,
        action: ActionId,
        prop: PropId,
        created: bool,
        total: f64,
    );
}

/// Plain PFT-DPW.
pub struct NoReuse;

impl<M: GenerativeModel> RootHook<M> for NoReuse {
    fn try_reuse<R: Rng + ?Sized>(
        &mut self,
        _ctx: &mut SearchCtx<'_, M, R>,
        _action: ActionId,
        _depth: u32,
    ) -> Option<(f64, u64)> {
        None
    }

    fn after_backup<R: Rng + ?Sized>(
        &mut self,
        _ctx: &mut SearchCtx<'_, M, R>,
        _action: ActionId,
        _prop: PropId,
        _created: bool,
        _total: f64,
    ) {
    }
}

/// Run simulations until the counter reaches `cfg.iterations`, then pick the
/// root action with the largest Q (lowest index on ties).
pub fn plan_with_hook<M, R, H>(
    b: BeliefOf<M>,
    cfg: &PlannerConfig,
    model: &M,
    hook: &mut H,
    rng: &mut R,
) -> OutcomeOf<M>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
    H: RootHook<M>,
{
    let mut ctx = SearchCtx {
        model,
        cfg,
        tree: TreeOf::<M>::new(b),
        rng,
        stats: PlanStats::default(),
    };
    let root = ctx.tree.root();
    let mut counter = 0;
    while counter < cfg.iterations {
        ctx.stats.simulations += 1;
        let (_, advance) = simulate(&mut ctx, hook, root, cfg.horizon, true);
        counter += advance;
    }
    ctx.stats.counter = counter;
    let action = best_root_action(&mut ctx);
    PlanOutcome {
        action,
        tree: ctx.tree,
        stats: ctx.stats,
    }
}

fn best_root_action<M: GenerativeModel, R: Rng + ?Sized>(ctx: &mut SearchCtx<'_, M, R>) -> M::Action {
    let root = ctx.tree.belief(ctx.tree.root());
    let mut best: Option<ActionId> = None;
    let mut best_q = f64::NEG_INFINITY;
    for &a in &root.actions {
        let q = ctx.tree.action(a).q;
        if best.is_none() || q > best_q {
            best = Some(a);
            best_q = q;
        }
    }
    match best {
        Some(a) => ctx.tree.action(a).action.clone(),
        None => match ctx.model.action_space() {
            ActionSpace::Discrete(list) => list[0].clone(),
            ActionSpace::Continuous => ctx.model.sample_action(&root.belief, ctx.rng),
        },
    }
}

fn widening_allows(count: usize, visits: u64, k: f64, alpha: f64) -> bool {
    k.is_infinite() || (count as f64) <= k * (visits as f64).powf(alpha)
}

/// Action progressive widening followed by UCB selection.
fn select_action<M: GenerativeModel, R: Rng + ?Sized>(
    ctx: &mut SearchCtx<'_, M, R>,
    b: BeliefId,
) -> ActionId {
    let node = ctx.tree.belief(b);
    let count = node.actions.len();
    if widening_allows(count, node.n, ctx.cfg.k_action, ctx.cfg.alpha_action) {
        let next = match ctx.model.action_space() {
            ActionSpace::Discrete(list) => list.get(count).cloned(),
            ActionSpace::Continuous => Some(ctx.model.sample_action(&node.belief, ctx.rng)),
        };
        if let Some(a) = next {
            ctx.tree.add_action(b, a);
        }
    }
    let node = ctx.tree.belief(b);
    let ln_n = (node.n as f64).ln();
    let mut best = node.actions[0];
    let mut best_score = f64::NEG_INFINITY;
    for &a in &node.actions {
        let an = ctx.tree.action(a);
        let score = if an.n == 0 {
            f64::INFINITY
        } else {
            an.q + ctx.cfg.c_ucb * (ln_n / an.n as f64).sqrt()
        };
        if score > best_score {
            best = a;
            best_score = score;
        }
    }
    best
}

/// One simulation from belief node `b` with `d` steps to go. Returns the
/// discounted return and how far the simulation counter advances.
pub(crate) fn simulate<M, R, H>(
    ctx: &mut SearchCtx<'_, M, R>,
    hook: &mut H,
    b: BeliefId,
    d: u32,
    is_root: bool,
) -> (f64, u64)
where
    M: GenerativeModel,
    R: Rng + ?Sized,
    H: RootHook<M>,
{
    if d == 0 {
        ctx.tree.add_tail(b, None, false);
        return (0.0, 1);
    }
    if ctx.model.is_terminal(&ctx.tree.belief(b).belief) {
        ctx.tree.add_tail(b, None, true);
        return (0.0, 1);
    }
    let a = select_action(ctx, b);
    let an = ctx.tree.action(a);
    let allow = widening_allows(an.children.len(), an.n, ctx.cfg.k_obs, ctx.cfg.alpha_obs);

    let (prop, edge, created, total);
    if allow {
        if is_root {
            if let Some(result) = hook.try_reuse(ctx, a, d) {
                return result;
            }
        }
        let step = pf_step_with_retry(
            ctx.model,
            &ctx.tree.belief(b).belief,
            &ctx.tree.action(a).action,
            ctx.rng,
        );
        let step = match step {
            Ok(step) => step,
            Err(_) => {
                ctx.stats.pruned += 1;
                ctx.tree.add_tail(b, None, true);
                return (0.0, 1);
            }
        };
        ctx.stats.reward_calls += 1;
        let reward = step.reward;
        let (pid, posterior) = ctx.tree.add_transition(
            a,
            step.propagated.with_horizon(d),
            step.posterior,
            step.observation,
            reward,
        );
        let ro = rollout_from(
            &ctx.tree.belief(posterior).belief,
            d - 1,
            ctx.cfg,
            ctx.model,
            ctx.rng,
        );
        ctx.stats.reward_calls += u64::from(ro.steps);
        let end = (ro.steps > 0).then_some(ro.end);
        ctx.tree.add_tail(posterior, end, ro.stopped);
        prop = pid;
        edge = 0;
        created = true;
        total = reward + ctx.cfg.gamma * ro.value;
    } else {
        let children = &ctx.tree.action(a).children;
        let pid = children[ctx.rng.random_range(0..children.len())];
        let n_edges = ctx.tree.prop(pid).edges.len();
        let e = if n_edges == 1 {
            0
        } else {
            ctx.rng.random_range(0..n_edges)
        };
        let edge_ref = &ctx.tree.prop(pid).edges[e];
        let (posterior, reward) = (edge_ref.posterior, edge_ref.reward);
        let (value, _) = simulate(ctx, hook, posterior, d - 1, false);
        prop = pid;
        edge = e;
        created = false;
        total = reward + ctx.cfg.gamma * value;
    }

    ctx.tree.belief_mut(b).n += 1;
    let an = ctx.tree.action_mut(a);
    an.n += 1;
    an.q += (total - an.q) / an.n as f64;
    let pn = ctx.tree.prop_mut(prop);
    pn.n += 1;
    pn.return_sum += total;
    let en = &mut pn.edges[edge];
    en.visits += 1;
    en.return_sum += total;
    if is_root {
        hook.after_backup(ctx, a, prop, created, total);
    }
    (total, 1)
}
