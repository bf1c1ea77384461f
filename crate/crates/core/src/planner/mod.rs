//! Tree search in belief space: belief-RRT and belief-SST share one loop and differ in
//! node selection and pruning.

mod extend;
mod index;
mod select;
mod sst;
mod tree;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::belief::GaussianBelief;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::metric::MetricKind;
use crate::propagation::MotionPlan;
use crate::sampling::{BeliefSampler, SamplerParams};
use crate::system::LinearSystem;
use crate::validity::{goal_satisfied, is_valid};

pub use extend::{choose_closest, extend, propagate_candidate, random_control, Candidate};
pub use index::{BeliefIndex, NearestSearch};
pub use select::{rrt_select, sst_select};
pub use sst::{sst_prune, Witnesses};
pub use tree::{extract_plan, EdgeControls, Tree, TreeNode, EXTRACT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BeliefRrt,
    BeliefSst,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::BeliefRrt => "belief_rrt",
            Algorithm::BeliefSst => "belief_sst",
        }
    }
}

/// How planning time is measured.
///
/// `Effort` converts iterations to seconds at a fixed rate, so budgets and anytime
/// cutoffs do not depend on the machine or its load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Clock {
    Wall,
    Effort { iterations_per_second: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerParams {
    pub metric: MetricKind,
    pub sampler: SamplerParams,
    pub sst_delta_bn: f64,
    pub sst_delta_s: f64,
    pub extend_candidates: usize,
    /// Seconds on `clock`.
    pub time_budget: f64,
    pub iteration_budget: Option<usize>,
    pub clock: Clock,
    pub stop_at_first: bool,
    pub nearest: NearestSearch,
    /// Grid pitch for [`NearestSearch::Grid`], in meters.
    pub grid_cell: f64,
}

impl PlannerParams {
    pub fn new(sampler: SamplerParams) -> Self {
        Self {
            metric: MetricKind::Wasserstein2,
            sampler,
            sst_delta_bn: 15.0,
            sst_delta_s: 5.0,
            extend_candidates: 3,
            time_budget: 10.0,
            iteration_budget: None,
            clock: Clock::Wall,
            stop_at_first: false,
            nearest: NearestSearch::Grid,
            grid_cell: 5.0,
        }
    }

    pub fn validate(&self, sys: &LinearSystem, env: &Environment) -> Result<()> {
        self.sampler.validate(sys.state_dim(), env.position_dims())?;
        if !(self.sst_delta_bn > 0.0 && self.sst_delta_s > 0.0) {
            return Err(Error::Invalid("SST radii must be positive".into()));
        }
        if self.extend_candidates == 0 {
            return Err(Error::Invalid("extend_candidates must be at least 1".into()));
        }
        if !(self.time_budget >= 0.0) {
            return Err(Error::Invalid("time budget must be non-negative".into()));
        }
        if let Clock::Effort { iterations_per_second } = self.clock {
            if !(iterations_per_second > 0.0 && iterations_per_second.is_finite()) {
                return Err(Error::Invalid("iterations_per_second must be positive".into()));
            }
        }
        if !(self.grid_cell > 0.0) {
            return Err(Error::Invalid("grid_cell must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Solved,
    NoSolution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSample {
    /// Seconds on the planner clock.
    pub time: f64,
    pub wall_s: f64,
    pub iteration: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeStats {
    pub iterations: usize,
    pub nodes_created: usize,
    pub live_nodes: usize,
    pub active_nodes: usize,
    pub witnesses: usize,
    pub failed_extensions: usize,
    pub pruned_candidates: usize,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub best_plan: Option<MotionPlan>,
    pub first_solution: Option<CostSample>,
    /// One entry per improvement; costs strictly decrease.
    pub cost_history: Vec<CostSample>,
    pub stats: TreeStats,
    /// Planner clock time actually spent.
    pub elapsed: f64,
    pub wall_s: f64,
}

impl PlanResult {
    /// Best cost known at planner time `t`, carrying the last value forward.
    pub fn cost_at(&self, t: f64) -> Option<f64> {
        self.cost_history.iter().take_while(|s| s.time <= t).last().map(|s| s.cost)
    }
}

struct Timer {
    clock: Clock,
    start: Instant,
}

impl Timer {
    fn now(&self, iteration: usize) -> f64 {
        match self.clock {
            Clock::Wall => self.start.elapsed().as_secs_f64(),
            Clock::Effort { iterations_per_second } => iteration as f64 / iterations_per_second,
        }
    }
}

/// Runs the anytime search until the time or iteration budget runs out.
pub fn plan(
    env: &Environment,
    sys: &LinearSystem,
    b_init: &GaussianBelief,
    params: &PlannerParams,
    algo: Algorithm,
) -> Result<PlanResult> {
    params.validate(sys, env)?;
    if b_init.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial belief has dimension {}, system {}",
            b_init.dim(),
            sys.state_dim()
        )));
    }
    if !is_valid(b_init, env) {
        return Err(Error::Invalid("initial belief violates the chance constraint".into()));
    }
    let timer = Timer { clock: params.clock, start: Instant::now() };
    let metric = params.metric;
    let mut stats = TreeStats::default();

    if goal_satisfied(b_init, env) {
        let plan = MotionPlan::from_controls(b_init, Vec::new(), sys, env)?;
        let sample = CostSample { time: 0.0, wall_s: timer.start.elapsed().as_secs_f64(), iteration: 0, cost: 0.0 };
        stats.live_nodes = 1;
        stats.active_nodes = 1;
        return Ok(PlanResult {
            status: PlanStatus::Solved,
            best_plan: Some(plan),
            first_solution: Some(sample),
            cost_history: vec![sample],
            stats,
            elapsed: 0.0,
            wall_s: sample.wall_s,
        });
    }

    let mut tree = Tree::new(b_init.clone());
    let mut active = BeliefIndex::new(params.nearest, &env.bounds, params.grid_cell);
    active.insert(0, b_init);
    let mut witnesses = Witnesses::new(BeliefIndex::new(params.nearest, &env.bounds, params.grid_cell));
    if algo == Algorithm::BeliefSst {
        let root = tree.root().belief.clone();
        let _ = sst_prune_root(&mut witnesses, &root, params.sst_delta_s, metric);
    }
    let mut sampler = BeliefSampler::new(params.sampler.clone());
    let mut best: Option<MotionPlan> = None;
    let mut history: Vec<CostSample> = Vec::new();

    let mut iteration = 0;
    loop {
        if params.iteration_budget.is_some_and(|n| iteration >= n) || timer.now(iteration) >= params.time_budget {
            break;
        }
        if params.stop_at_first && best.is_some() {
            break;
        }
        iteration += 1;
        let sample = sampler.sample(env);
        let selected = match algo {
            Algorithm::BeliefRrt => rrt_select(&tree, &active, &sample, metric),
            Algorithm::BeliefSst => sst_select(&tree, &active, &sample, metric, params.sst_delta_bn),
        };
        let candidate = extend(
            &tree,
            selected,
            &sample,
            sys,
            env,
            metric,
            params.extend_candidates,
            sampler.rng(),
        );
        let Some(candidate) = candidate else {
            stats.failed_extensions += 1;
            continue;
        };
        let id = match algo {
            Algorithm::BeliefRrt => {
                let id = tree.add(selected, candidate.belief, candidate.edge, candidate.edge_cost);
                active.insert(id, tree.belief(id));
                Some(id)
            }
            Algorithm::BeliefSst => {
                sst_prune(&mut tree, &mut active, &mut witnesses, selected, candidate, params.sst_delta_s, metric)
            }
        };
        let Some(id) = id else {
            stats.pruned_candidates += 1;
            continue;
        };
        stats.nodes_created += 1;
        let node = tree.node(id);
        if best.as_ref().is_none_or(|p| node.cost < p.cost) && goal_satisfied(&node.belief, env) {
            let plan = extract_plan(&tree, id, sys, env)?;
            let sample = CostSample {
                time: timer.now(iteration),
                wall_s: timer.start.elapsed().as_secs_f64(),
                iteration,
                cost: plan.cost,
            };
            history.push(sample);
            best = Some(plan);
        }
    }

    stats.iterations = iteration;
    stats.live_nodes = (0..tree.capacity()).filter(|&i| tree.is_live(i)).count();
    stats.active_nodes = active.len();
    stats.witnesses = witnesses.len();
    Ok(PlanResult {
        status: if best.is_some() { PlanStatus::Solved } else { PlanStatus::NoSolution },
        best_plan: best,
        first_solution: history.first().copied(),
        cost_history: history,
        stats,
        elapsed: timer.now(iteration),
        wall_s: timer.start.elapsed().as_secs_f64(),
    })
}

/// Seeds the witness set with the root as its own representative.
fn sst_prune_root(witnesses: &mut Witnesses, root: &GaussianBelief, radius: f64, metric: MetricKind) -> usize {
    let w = witnesses.locate_or_insert(root, radius, metric);
    witnesses.set_representative(w, 0);
    w
}
