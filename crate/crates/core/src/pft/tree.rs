//! Arena-backed belief search tree.
//!
//! Three node kinds alternate: posterior belief nodes, action nodes and
//! propagated-belief nodes. A propagated node owns posterior edges, each
//! carrying the observation and the reward of the step that produced it.
//!
//! Rollouts are not stored as nodes. Each trajectory ends in a [`Tail`] hanging
//! off the last tree node it visited; the tail keeps the belief the rollout
//! stopped at so the trajectory can later be extended.

use crate::pomdp::{ParticleBelief, PropagatedBelief};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropId(pub usize);

/// End of one or more trajectories below a belief node.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail<S> {
    /// Belief the trajectories stopped at; `None` when they stopped at the
    /// node itself.
    pub end: Option<ParticleBelief<S>>,
    pub trajectories: u64,
    /// Terminal or dead-end trajectories are never extended.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode<S> {
    pub belief: ParticleBelief<S>,
    pub n: u64,
    pub actions: Vec<ActionId>,
    pub tails: Vec<Tail<S>>,
    pub parent: Option<PropId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode<A> {
    pub action: A,
    pub n: u64,
    pub q: f64,
    pub children: Vec<PropId>,
    /// Number of children grafted from a previous session.
    pub reused_children: u64,
    pub parent: BeliefId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEdge<O> {
    pub posterior: BeliefId,
    pub observation: O,
    pub reward: f64,
    pub visits: u64,
    /// Sum of returns, measured from the parent action, of the trajectories
    /// through this edge.
    pub return_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropNode<S, O> {
    pub belief: PropagatedBelief<S>,
    pub n: u64,
    pub return_sum: f64,
    pub edges: Vec<PosteriorEdge<O>>,
    pub reused: bool,
    pub parent: ActionId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree<S, A, O> {
    beliefs: Vec<BeliefNode<S>>,
    actions: Vec<ActionNode<A>>,
    props: Vec<PropNode<S, O>>,
}

impl<S: Clone, A: Clone, O: Clone> SearchTree<S, A, O> {
    pub fn new(root: ParticleBelief<S>) -> Self {
        Self {
            beliefs: vec![BeliefNode {
                belief: root,
                n: 0,
                actions: Vec::new(),
                tails: Vec::new(),
                parent: None,
            }],
            actions: Vec::new(),
            props: Vec::new(),
        }
    }

    pub fn root(&self) -> BeliefId {
        BeliefId(0)
    }

    pub fn belief(&self, id: BeliefId) -> &BeliefNode<S> {
        &self.beliefs[id.0]
    }

    pub fn belief_mut(&mut self, id: BeliefId) -> &mut BeliefNode<S> {
        &mut self.beliefs[id.0]
    }

    pub fn action(&self, id: ActionId) -> &ActionNode<A> {
        &self.actions[id.0]
    }

    pub fn action_mut(&mut self, id: ActionId) -> &mut ActionNode<A> {
        &mut self.actions[id.0]
    }

    pub fn prop(&self, id: PropId) -> &PropNode<S, O> {
        &self.props[id.0]
    }

    pub fn prop_mut(&mut self, id: PropId) -> &mut PropNode<S, O> {
        &mut self.props[id.0]
    }

    pub fn belief_count(&self) -> usize {
        self.beliefs.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn prop_count(&self) -> usize {
        self.props.len()
    }

    pub fn prop_ids(&self) -> impl Iterator<Item = PropId> {
        (0..self.props.len()).map(PropId)
    }

    pub fn belief_ids(&self) -> impl Iterator<Item = BeliefId> {
        (0..self.beliefs.len()).map(BeliefId)
    }

    pub fn add_action(&mut self, parent: BeliefId, action: A) -> ActionId {
        let id = ActionId(self.actions.len());
        self.actions.push(ActionNode {
            action,
            n: 0,
            q: 0.0,
            children: Vec::new(),
            reused_children: 0,
            parent,
        });
        self.beliefs[parent.0].actions.push(id);
        id
    }

    /// Attach a propagated node with one posterior edge under `parent`.
    pub fn add_transition(
        &mut self,
        parent: ActionId,
        propagated: PropagatedBelief<S>,
        posterior: ParticleBelief<S>,
        observation: O,
        reward: f64,
    ) -> (PropId, BeliefId) {
        let pid = PropId(self.props.len());
        let bid = BeliefId(self.beliefs.len());
        self.beliefs.push(BeliefNode {
            belief: posterior,
            n: 0,
            actions: Vec::new(),
            tails: Vec::new(),
            parent: Some(pid),
        });
        self.props.push(PropNode {
            belief: propagated,
            n: 0,
            return_sum: 0.0,
            edges: vec![PosteriorEdge {
                posterior: bid,
                observation,
                reward,
                visits: 0,
                return_sum: 0.0,
            }],
            reused: false,
            parent,
        });
        self.actions[parent.0].children.push(pid);
        (pid, bid)
    }

    /// Record a trajectory ending below `node`. Tails that stop at the node
    /// itself are merged.
    pub fn add_tail(&mut self, node: BeliefId, end: Option<ParticleBelief<S>>, terminal: bool) {
        let tails = &mut self.beliefs[node.0].tails;
        if end.is_none() {
            if let Some(t) = tails
                .iter_mut()
                .find(|t| t.end.is_none() && t.terminal == terminal)
            {
                t.trajectories += 1;
                return;
            }
        }
        tails.push(Tail {
            end,
            trajectories: 1,
            terminal,
        });
    }

    /// Deep-copy the subtree of `src` rooted at `prop` under `parent` in this
    /// tree. The copy is flagged as reused.
    pub fn graft(&mut self, src: &SearchTree<S, A, O>, prop: PropId, parent: ActionId) -> PropId {
        let new = self.copy_prop(src, prop, parent);
        self.props[new.0].reused = true;
        self.actions[parent.0].children.push(new);
        self.actions[parent.0].reused_children += 1;
        new
    }

    fn copy_prop(&mut self, src: &SearchTree<S, A, O>, prop: PropId, parent: ActionId) -> PropId {
        let node = src.prop(prop);
        let pid = PropId(self.props.len());
        self.props.push(PropNode {
            belief: node.belief.clone(),
            n: node.n,
            return_sum: node.return_sum,
            edges: Vec::with_capacity(node.edges.len()),
            reused: false,
            parent,
        });
        for edge in &node.edges {
            let posterior = self.copy_belief(src, edge.posterior, pid);
            self.props[pid.0].edges.push(PosteriorEdge {
                posterior,
                observation: edge.observation.clone(),
                reward: edge.reward,
                visits: edge.visits,
                return_sum: edge.return_sum,
            });
        }
        pid
    }

    fn copy_belief(&mut self, src: &SearchTree<S, A, O>, id: BeliefId, parent: PropId) -> BeliefId {
        let node = src.belief(id);
        let bid = BeliefId(self.beliefs.len());
        self.beliefs.push(BeliefNode {
            belief: node.belief.clone(),
            n: node.n,
            actions: Vec::with_capacity(node.actions.len()),
            tails: node.tails.clone(),
            parent: Some(parent),
        });
        for &aid in &node.actions {
            let a = src.action(aid);
            let new_aid = ActionId(self.actions.len());
            self.actions.push(ActionNode {
                action: a.action.clone(),
                n: a.n,
                q: a.q,
                children: Vec::with_capacity(a.children.len()),
                reused_children: a.reused_children,
                parent: bid,
            });
            self.beliefs[bid.0].actions.push(new_aid);
            for &child in &a.children {
                let c = self.copy_prop(src, child, new_aid);
                self.actions[new_aid.0].children.push(c);
            }
        }
        bid
    }

    /// Propagated nodes of the subtree rooted at `prop`, including itself.
    pub fn subtree_props(&self, prop: PropId) -> Vec<PropId> {
        let mut out = Vec::new();
        let mut stack = vec![prop];
        while let Some(p) = stack.pop() {
            out.push(p);
            for e in &self.props[p.0].edges {
                for &a in &self.beliefs[e.posterior.0].actions {
                    stack.extend(self.actions[a.0].children.iter().copied());
                }
            }
        }
        out
    }

    /// Child action of `node` whose action equals `action`.
    pub fn find_action(&self, node: BeliefId, action: &A) -> Option<ActionId>
    where
        A: PartialEq,
    {
        self.beliefs[node.0]
            .actions
            .iter()
            .copied()
            .find(|&a| self.actions[a.0].action == *action)
    }

    /// Check count conservation: `N(b) = Σ N(b,a)` and `N(b,a) = Σ N(b⁻)`
    /// everywhere, and that only root actions carry reused children.
    pub fn check_counts(&self) -> Result<(), String> {
        for (i, b) in self.beliefs.iter().enumerate() {
            let sum: u64 = b.actions.iter().map(|a| self.actions[a.0].n).sum();
            if sum != b.n {
                return Err(format!("belief {i}: N(b) = {} but Σ N(b,a) = {sum}", b.n));
            }
        }
        for (i, a) in self.actions.iter().enumerate() {
            let sum: u64 = a.children.iter().map(|p| self.props[p.0].n).sum();
            if sum != a.n {
                return Err(format!("action {i}: N(b,a) = {} but Σ N(b⁻) = {sum}", a.n));
            }
            let reused = a.children.iter().filter(|p| self.props[p.0].reused).count() as u64;
            if reused != a.reused_children {
                return Err(format!("action {i}: reused counter out of sync"));
            }
            if reused > 0 && a.parent != self.root() {
                return Err(format!("action {i}: reused child below the root"));
            }
        }
        for (i, p) in self.props.iter().enumerate() {
            let sum: u64 = p.edges.iter().map(|e| e.visits).sum();
            if sum != p.n {
                return Err(format!("prop {i}: N(b⁻) = {} but Σ edge visits = {sum}", p.n));
            }
        }
        Ok(())
    }
}
