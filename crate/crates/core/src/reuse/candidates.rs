//! Reuse candidates: well-visited propagated beliefs two levels below the
//! executed action of the previous planning session.

use super::{ReuseError, Result};
use crate::numeric::squared_distance;
use crate::pft::tree::{ActionId, PropId, SearchTree};
use crate::pomdp::{GenerativeModel, ParticleBelief};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Propagated node in the retained tree.
    pub prop: PropId,
    pub visits: u64,
    /// Action node `(b_{k+1}, a')` the candidate was generated from.
    pub origin: ActionId,
    /// Steps that were expanded below the candidate's parent belief.
    pub horizon_depth: u32,
    pub mean: Vec<f64>,
}

/// Enumerate `b⁻_{k+2}` nodes under `(root, executed_action)` with strictly
/// more than `n_min` visits. Reused children of the executed action are
/// skipped, so grafted subtrees are never offered twice.
pub fn update_reuse_candidates<S, A, O>(
    tree: &SearchTree<S, A, O>,
    executed_action: &A,
    n_min: u64,
) -> Vec<Candidate>
where
    S: Clone + AsRef<[f64]>,
    A: Clone + PartialEq,
    O: Clone,
{
    let mut out = Vec::new();
    let Some(a) = tree.find_action(tree.root(), executed_action) else {
        return out;
    };
    for &child in &tree.action(a).children {
        let prop = tree.prop(child);
        if prop.reused {
            continue;
        }
        for edge in &prop.edges {
            for &a2 in &tree.belief(edge.posterior).actions {
                for &grandchild in &tree.action(a2).children {
                    let g = tree.prop(grandchild);
                    if g.n > n_min && !g.reused {
                        out.push(Candidate {
                            prop: grandchild,
                            visits: g.n,
                            origin: a2,
                            horizon_depth: g.belief.horizon_depth,
                            mean: g.belief.mean(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Previous-session tree plus the candidates still available from it.
#[derive(Debug, Clone)]
pub struct CandidatePool<S, A, O> {
    tree: Option<SearchTree<S, A, O>>,
    candidates: Vec<Candidate>,
}

impl<S, A, O> Default for CandidatePool<S, A, O> {
    fn default() -> Self {
        Self {
            tree: None,
            candidates: Vec::new(),
        }
    }
}

impl<S, A, O> CandidatePool<S, A, O>
where
    S: Clone + AsRef<[f64]>,
    A: Clone + PartialEq,
    O: Clone,
{
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn tree(&self) -> Option<&SearchTree<S, A, O>> {
        self.tree.as_ref()
    }

    /// Replace the pool with the candidates of the session that just ended.
    /// The older tree is dropped.
    pub fn refresh(&mut self, tree: SearchTree<S, A, O>, executed_action: &A, n_min: u64) {
        self.candidates = update_reuse_candidates(&tree, executed_action, n_min);
        self.tree = Some(tree);
    }

    pub fn clear(&mut self) {
        self.tree = None;
        self.candidates.clear();
    }

    /// Remove and return the candidate minimizing `distance`; ties go to the
    /// earliest candidate.
    pub fn take_closest_by(&mut self, mut distance: impl FnMut(&Candidate) -> f64) -> Result<Candidate> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.candidates.iter().enumerate() {
            let d = distance(c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.ok_or(ReuseError::NoCandidates)?;
        Ok(self.candidates.remove(i))
    }

    /// Remove and return the candidate whose mean is closest to the mean of
    /// the maximum-likelihood propagation of `b` under `a`.
    pub fn take_closest<M>(&mut self, model: &M, b: &ParticleBelief<S>, a: &A) -> Result<Candidate>
    where
        M: GenerativeModel<State = S, Action = A, Observation = O>,
    {
        let target = mle_mean(model, b, a);
        self.take_closest_by(|c| squared_distance(&c.mean, &target))
    }
}

/// Mean of `b` pushed through the noise-free transition under `a`; O(m).
pub fn mle_mean<M: GenerativeModel>(model: &M, b: &ParticleBelief<M::State>, a: &M::Action) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for s in b.particles() {
        let next = model.transition_mode(s, a);
        let next = next.as_ref();
        if acc.is_empty() {
            acc = vec![0.0; next.len()];
        }
        for (x, v) in acc.iter_mut().zip(next) {
            *x += v;
        }
    }
    let m = b.len() as f64;
    acc.iter_mut().for_each(|x| *x /= m);
    acc
}
