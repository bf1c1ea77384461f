use nalgebra::DVector;

use crate::belief::GaussianBelief;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::propagation::MotionPlan;
use crate::system::LinearSystem;

/// One control held for `steps` time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeControls {
    pub control: DVector<f64>,
    pub steps: usize,
}

impl EdgeControls {
    pub fn expand(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        std::iter::repeat_n(&self.control, self.steps).cloned()
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub belief: GaussianBelief,
    pub parent: Option<usize>,
    pub edge: Option<EdgeControls>,
    /// Accumulated nominal path length from the root.
    pub cost: f64,
    pub active: bool,
    pub(crate) removed: bool,
    pub(crate) children: usize,
}

/// Node arena; ids are stable and removed nodes keep their slot.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn new(root: GaussianBelief) -> Self {
        Self {
            nodes: vec![TreeNode {
                belief: root,
                parent: None,
                edge: None,
                cost: 0.0,
                active: true,
                removed: false,
                children: 0,
            }],
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn belief(&self, id: usize) -> &GaussianBelief {
        &self.nodes[id].belief
    }

    /// Number of slots ever allocated, including removed nodes.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.removed).count()
    }

    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.active && !n.removed)
            .map(|(i, _)| i)
    }

    pub fn is_live(&self, id: usize) -> bool {
        !self.nodes[id].removed
    }

    pub fn add(&mut self, parent: usize, belief: GaussianBelief, edge: EdgeControls, edge_cost: f64) -> usize {
        let cost = self.nodes[parent].cost + edge_cost;
        self.nodes[parent].children += 1;
        self.nodes.push(TreeNode {
            belief,
            parent: Some(parent),
            edge: Some(edge),
            cost,
            active: true,
            removed: false,
            children: 0,
        });
        self.nodes.len() - 1
    }

    /// Marks `id` inactive, then deletes it and any ancestors that become inactive leaves.
    /// Returns the removed ids.
    pub fn deactivate(&mut self, id: usize) -> Vec<usize> {
        self.nodes[id].active = false;
        let mut removed = Vec::new();
        let mut cur = id;
        loop {
            let n = &self.nodes[cur];
            if n.active || n.children > 0 || n.removed {
                break;
            }
            let Some(parent) = n.parent else { break };
            self.nodes[cur].removed = true;
            self.nodes[parent].children -= 1;
            removed.push(cur);
            cur = parent;
        }
        removed
    }

    /// Edges from the root to `id`, in execution order.
    pub fn path_edges(&self, id: usize) -> Vec<&EdgeControls> {
        let mut edges = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            edges.push(self.nodes[cur].edge.as_ref().expect("non-root nodes carry an edge"));
            cur = p;
        }
        edges.reverse();
        edges
    }
}

/// Tolerance on the recomputed terminal belief in [`extract_plan`].
pub const EXTRACT_TOLERANCE: f64 = 1e-9;

/// Concatenates the root-to-node controls and re-propagates them from the root belief.
pub fn extract_plan(tree: &Tree, id: usize, sys: &LinearSystem, env: &Environment) -> Result<MotionPlan> {
    if !tree.is_live(id) {
        return Err(Error::InconsistentTree(format!("node {id} was removed")));
    }
    let controls: Vec<DVector<f64>> = tree.path_edges(id).into_iter().flat_map(|e| e.expand()).collect();
    let plan = MotionPlan::from_controls(&tree.root().belief, controls, sys, env)?;
    let stored = tree.belief(id);
    let diff = plan.terminal().max_abs_diff(stored);
    if !(diff <= EXTRACT_TOLERANCE) {
        return Err(Error::InconsistentTree(format!(
            "recomputed terminal belief differs from node {id} by {diff:e}"
        )));
    }
    let cost_gap = (plan.cost - tree.node(id).cost).abs();
    if cost_gap > 1e-6 * plan.cost.max(1.0) {
        return Err(Error::InconsistentTree(format!(
            "recomputed cost differs from node {id} by {cost_gap:e}"
        )));
    }
    Ok(plan)
}
