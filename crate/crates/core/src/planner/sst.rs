//! Witness bookkeeping for the sparse tree: each witness keeps at most one cheapest
//! active representative nearby.

use crate::belief::GaussianBelief;
use crate::metric::MetricKind;

use super::extend::Candidate;
use super::index::BeliefIndex;
use super::tree::Tree;

#[derive(Debug, Clone)]
pub struct Witnesses {
    beliefs: Vec<GaussianBelief>,
    representative: Vec<Option<usize>>,
    index: BeliefIndex,
}

impl Witnesses {
    pub fn new(index: BeliefIndex) -> Self {
        Self { beliefs: Vec::new(), representative: Vec::new(), index }
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn representative(&self, w: usize) -> Option<usize> {
        self.representative[w]
    }

    pub(crate) fn set_representative(&mut self, w: usize, id: usize) {
        self.representative[w] = Some(id);
    }

    pub fn belief(&self, w: usize) -> &GaussianBelief {
        &self.beliefs[w]
    }

    /// Witness within `radius` of `belief`, creating one at `belief` if there is none.
    pub fn locate_or_insert(&mut self, belief: &GaussianBelief, radius: f64, metric: MetricKind) -> usize {
        let beliefs = &self.beliefs;
        if let Some((w, d)) = self.index.nearest(belief, metric, |i| &beliefs[i]) {
            if d <= radius {
                return w;
            }
        }
        let w = self.beliefs.len();
        self.beliefs.push(belief.clone());
        self.representative.push(None);
        self.index.insert(w, belief);
        w
    }
}

/// Adds `candidate` under `parent` if it beats its witness's representative, deactivating
/// (and pruning the dead leaf chain of) the old representative. Returns the new id, or
/// `None` when the candidate is dominated.
#[allow(clippy::too_many_arguments)]
pub fn sst_prune(
    tree: &mut Tree,
    active: &mut BeliefIndex,
    witnesses: &mut Witnesses,
    parent: usize,
    candidate: Candidate,
    radius: f64,
    metric: MetricKind,
) -> Option<usize> {
    let w = witnesses.locate_or_insert(&candidate.belief, radius, metric);
    let cost = tree.node(parent).cost + candidate.edge_cost;
    let previous = witnesses.representative(w);
    if let Some(rep) = previous {
        if tree.is_live(rep) && !(cost < tree.node(rep).cost) {
            return None;
        }
    }
    let id = tree.add(parent, candidate.belief, candidate.edge, candidate.edge_cost);
    active.insert(id, tree.belief(id));
    witnesses.representative[w] = Some(id);
    if let Some(rep) = previous {
        if tree.is_live(rep) && tree.node(rep).active {
            active.remove(rep, tree.belief(rep));
            tree.deactivate(rep);
        }
    }
    Some(id)
}
