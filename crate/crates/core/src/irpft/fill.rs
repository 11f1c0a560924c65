//! Extending a reused subtree to a longer planning horizon.
//!
//! Every non-terminal trajectory end below the subtree is continued by `Δd`
//! rollout steps. The extension is added to the return sums of all edges and
//! propagated nodes above it and to the Q values of the action nodes it passes
//! through, so stored statistics match the longer horizon without touching the
//! rewards already computed.

use rand::Rng;

use crate::pft::tree::{BeliefId, PropId};
use crate::pft::{rollout_from, PlannerConfig, TreeOf};
use crate::pomdp::GenerativeModel;

/// Work done by one [`fill_horizon`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FillReport {
    /// Belief nodes appended to trajectory ends (one per filter step).
    pub nodes_added: u64,
    pub reward_calls: u64,
    /// Sum over trajectories through the subtree root of the added return,
    /// discounted to the level of the subtree root's parent belief.
    pub added_return: f64,
}

/// Extend every trajectory below `prop` by `delta` steps of the rollout policy.
///
/// The subtree's stored horizon depths are read, not changed; callers shift
/// them afterwards.
pub fn fill_horizon<M: GenerativeModel, R: Rng + ?Sized>(
    tree: &mut TreeOf<M>,
    prop: PropId,
    delta: u32,
    cfg: &PlannerConfig,
    model: &M,
    rng: &mut R,
) -> FillReport {
    let mut report = FillReport::default();
    if delta == 0 {
        return report;
    }
    let mut filler = Filler {
        cfg,
        model,
        rng,
        delta,
        report: &mut report,
    };
    let added = filler.prop(tree, prop);
    report.added_return = added;
    report
}

struct Filler<'a, M, R: ?Sized> {
    cfg: &'a PlannerConfig,
    model: &'a M,
    rng: &'a mut R,
    delta: u32,
    report: &'a mut FillReport,
}

impl<M: GenerativeModel, R: Rng + ?Sized> Filler<'_, M, R> {
    fn prop(&mut self, tree: &mut TreeOf<M>, prop: PropId) -> f64 {
        let steps_below = tree.prop(prop).belief.horizon_depth.saturating_sub(1);
        let mut total = 0.0;
        for e in 0..tree.prop(prop).edges.len() {
            let posterior = tree.prop(prop).edges[e].posterior;
            let added = self.cfg.gamma * self.belief(tree, posterior, steps_below);
            tree.prop_mut(prop).edges[e].return_sum += added;
            total += added;
        }
        tree.prop_mut(prop).return_sum += total;
        total
    }

    /// `remaining` is the number of steps the trajectories through `node`
    /// already cover below it.
    fn belief(&mut self, tree: &mut TreeOf<M>, node: BeliefId, remaining: u32) -> f64 {
        let mut total = 0.0;
        let discount = self.cfg.gamma.powi(remaining as i32);
        for t in 0..tree.belief(node).tails.len() {
            let tail = &tree.belief(node).tails[t];
            if tail.terminal {
                continue;
            }
            let trajectories = tail.trajectories as f64;
            let ro = {
                let start = tail.end.as_ref().unwrap_or(&tree.belief(node).belief);
                rollout_from(start, self.delta, self.cfg, self.model, self.rng)
            };
            self.report.nodes_added += u64::from(ro.steps);
            self.report.reward_calls += u64::from(ro.steps);
            total += trajectories * discount * ro.value;
            let tail = &mut tree.belief_mut(node).tails[t];
            if ro.steps > 0 {
                tail.end = Some(ro.end);
            }
            tail.terminal = ro.stopped;
        }
        for i in 0..tree.belief(node).actions.len() {
            let a = tree.belief(node).actions[i];
            let mut added = 0.0;
            for j in 0..tree.action(a).children.len() {
                let child = tree.action(a).children[j];
                added += self.prop(tree, child);
            }
            let an = tree.action_mut(a);
            if an.n > 0 {
                an.q += added / an.n as f64;
            }
            total += added;
        }
        total
    }
}
