//! Closed-loop Monte Carlo execution of plans and the scripted replanning scenario.
//!
//! Execution keys measurements on the true state: the sensor reports wherever the robot
//! actually is, while planning assumed the nominal state.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::belief::GaussianBelief;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, sqrt_psd, symmetrize};
use crate::planner::{plan, Algorithm, Clock, PlanStatus, PlannerParams};
use crate::propagation::MotionPlan;
use crate::system::LinearSystem;

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// First step at which the true position was in collision or out of bounds.
    pub collision_step: Option<usize>,
    pub reached_goal: bool,
    /// True states up to and including the collision step.
    pub true_trajectory: Vec<DVector<f64>>,
    pub estimate_trajectory: Vec<DVector<f64>>,
}

impl RolloutResult {
    pub fn collided(&self) -> bool {
        self.collision_step.is_some()
    }
}

fn gaussian<R: Rng + ?Sized>(root: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(root.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    root * z
}

/// Square roots of the noise covariances used during execution.
struct NoiseRoots {
    q: DMatrix<f64>,
    regions: Vec<DMatrix<f64>>,
}

impl NoiseRoots {
    fn new(sys: &LinearSystem, world: &Environment) -> Result<Self> {
        Ok(Self {
            q: sqrt_psd(&sys.q)?,
            regions: world.measurement_regions.iter().map(|m| sqrt_psd(&m.noise)).collect::<Result<_>>()?,
        })
    }
}

/// True state, filter estimate and filter covariance of one executing robot.
#[derive(Debug, Clone)]
pub struct ExecutionState {
    pub x: DVector<f64>,
    pub estimate: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl ExecutionState {
    /// Draws `x̂₀ ~ N(x̌₀, Λ₀)` and `x₀ ~ N(x̂₀, Σ₀)`.
    pub fn sample<R: Rng + ?Sized>(start: &GaussianBelief, rng: &mut R) -> Result<Self> {
        let estimate = start.mean() + gaussian(&sqrt_psd(start.lambda())?, rng);
        let x = &estimate + gaussian(&sqrt_psd(start.sigma())?, rng);
        Ok(Self { x, estimate, sigma: start.sigma().clone() })
    }

    fn position(&self, k: usize) -> &[f64] {
        &self.x.as_slice()[..k.min(self.x.len())]
    }
}

/// Applies `u = ǔ − K(x̂ − x̌)`, advances the truth with process noise and runs the
/// Kalman filter with a measurement whenever the true position lies in a region of `world`.
fn advance<R: Rng + ?Sized>(
    state: &mut ExecutionState,
    nominal_control: &DVector<f64>,
    nominal_state: &DVector<f64>,
    sys: &LinearSystem,
    world: &Environment,
    roots: &NoiseRoots,
    rng: &mut R,
) -> Result<()> {
    let u = nominal_control - &sys.k * (&state.estimate - nominal_state);
    let w = gaussian(&roots.q, rng);
    state.x = &sys.a * &state.x + &sys.b * &u + w;
    let predicted = &sys.a * &state.estimate + &sys.b * &u;
    let sigma_minus = symmetrize(&(&sys.a * &state.sigma * sys.a.transpose() + &sys.q));
    let region = world
        .measurement_regions
        .iter()
        .position(|m| m.region.contains(crate::environment::planar(state.position(world.position_dims()))));
    match region {
        None => {
            state.estimate = predicted;
            state.sigma = sigma_minus;
        }
        Some(i) => {
            let r = &world.measurement_regions[i].noise;
            let v = gaussian(&roots.regions[i], rng);
            let z = &sys.c * &state.x + v;
            let c_sigma = &sys.c * &sigma_minus;
            let innovation = &c_sigma * sys.c.transpose() + r;
            let gain = spd_solve(&innovation, &c_sigma)?.transpose();
            state.estimate = &predicted + &gain * (z - &sys.c * &predicted);
            state.sigma = symmetrize(&(&sigma_minus - &gain * c_sigma));
        }
    }
    Ok(())
}

fn in_collision(p: &[f64], world: &Environment) -> bool {
    !world.point_is_free(p)
}

/// Executes `plan` once from a true initial state drawn from its start belief; stops at
/// the first collision.
pub fn rollout<R: Rng + ?Sized>(plan: &MotionPlan, sys: &LinearSystem, env: &Environment, rng: &mut R) -> Result<RolloutResult> {
    let roots = NoiseRoots::new(sys, env)?;
    rollout_with(plan, sys, env, &roots, rng)
}

fn rollout_with<R: Rng + ?Sized>(
    plan: &MotionPlan,
    sys: &LinearSystem,
    env: &Environment,
    roots: &NoiseRoots,
    rng: &mut R,
) -> Result<RolloutResult> {
    let k = env.position_dims();
    let mut state = ExecutionState::sample(plan.start(), rng)?;
    let mut true_trajectory = vec![state.x.clone()];
    let mut estimate_trajectory = vec![state.estimate.clone()];
    let mut collision_step = in_collision(state.position(k), env).then_some(0);
    if collision_step.is_none() {
        for (i, u) in plan.controls.iter().enumerate() {
            advance(&mut state, u, &plan.nominal_states[i], sys, env, roots, rng)?;
            true_trajectory.push(state.x.clone());
            estimate_trajectory.push(state.estimate.clone());
            if in_collision(state.position(k), env) {
                collision_step = Some(i + 1);
                break;
            }
        }
    }
    let reached_goal = collision_step.is_none() && env.goal.contains(state.position(k));
    Ok(RolloutResult { collision_step, reached_goal, true_trajectory, estimate_trajectory })
}

/// Per-step outcome of one execution that ignores collisions and runs to the end.
struct Trace {
    collisions: Vec<bool>,
    in_goal: bool,
}

fn trace<R: Rng + ?Sized>(
    plan: &MotionPlan,
    sys: &LinearSystem,
    env: &Environment,
    roots: &NoiseRoots,
    rng: &mut R,
) -> Result<Trace> {
    let k = env.position_dims();
    let mut state = ExecutionState::sample(plan.start(), rng)?;
    let mut collisions = Vec::with_capacity(plan.len() + 1);
    collisions.push(in_collision(state.position(k), env));
    for (i, u) in plan.controls.iter().enumerate() {
        advance(&mut state, u, &plan.nominal_states[i], sys, env, roots, rng)?;
        collisions.push(in_collision(state.position(k), env));
    }
    Ok(Trace { collisions, in_goal: env.goal.contains(state.position(k)) })
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceEstimate {
    pub trials: usize,
    /// Rollouts whose true position is in collision at each step, collisions ignored.
    pub collisions_per_step: Vec<usize>,
    /// Rollouts with a collision at any step.
    pub collided_runs: usize,
    /// Rollouts whose terminal true position is in the goal.
    pub goal_hits: usize,
    /// Rollouts that never collide and end in the goal.
    pub successes: usize,
}

impl ChanceEstimate {
    pub fn collision_rate(&self, step: usize) -> f64 {
        self.collisions_per_step[step] as f64 / self.trials as f64
    }

    pub fn collision_interval(&self, step: usize) -> (f64, f64) {
        wilson_interval(self.collisions_per_step[step], self.trials, Z_99)
    }

    /// Largest per-step upper 99% Wilson bound on the collision rate.
    pub fn worst_collision_upper(&self) -> f64 {
        (0..self.collisions_per_step.len())
            .map(|k| self.collision_interval(k).1)
            .fold(0.0, f64::max)
    }

    pub fn worst_collision_rate(&self) -> f64 {
        (0..self.collisions_per_step.len())
            .map(|k| self.collision_rate(k))
            .fold(0.0, f64::max)
    }

    pub fn goal_rate(&self) -> f64 {
        self.goal_hits as f64 / self.trials as f64
    }

    pub fn goal_interval(&self) -> (f64, f64) {
        wilson_interval(self.goal_hits, self.trials, Z_99)
    }
}

/// A generator for rollout `index` of a run with master `seed`; streams do not overlap.
pub fn rollout_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Executes `plan` `trials` times (in parallel, one generator stream per rollout) and
/// counts per-step collisions and terminal goal hits.
pub fn estimate_chance(
    plan: &MotionPlan,
    sys: &LinearSystem,
    env: &Environment,
    trials: usize,
    seed: u64,
) -> Result<ChanceEstimate> {
    let roots = NoiseRoots::new(sys, env)?;
    let steps = plan.len() + 1;
    let empty = || ChanceEstimate {
        trials: 0,
        collisions_per_step: vec![0; steps],
        collided_runs: 0,
        goal_hits: 0,
        successes: 0,
    };
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let t = trace(plan, sys, env, &roots, &mut rollout_rng(seed, i))?;
            let mut e = empty();
            e.trials = 1;
            for (k, &c) in t.collisions.iter().enumerate() {
                e.collisions_per_step[k] = c as usize;
            }
            let collided = t.collisions.iter().any(|&c| c);
            e.collided_runs = collided as usize;
            e.goal_hits = t.in_goal as usize;
            e.successes = (!collided && t.in_goal) as usize;
            Ok(e)
        })
        .try_reduce(empty, |mut a, b| {
            a.trials += b.trials;
            for (x, y) in a.collisions_per_step.iter_mut().zip(&b.collisions_per_step) {
                *x += y;
            }
            a.collided_runs += b.collided_runs;
            a.goal_hits += b.goal_hits;
            a.successes += b.successes;
            Ok(a)
        })
}

/// Replaces the environment at `step` (counted in executed steps from the start).
#[derive(Debug, Clone)]
pub struct EnvironmentUpdate {
    pub step: usize,
    pub env: Environment,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub env: Environment,
    pub sys: LinearSystem,
    pub start: GaussianBelief,
    /// Parameters for the initial plan.
    pub params: PlannerParams,
    pub algorithm: Algorithm,
    /// Time budget for each replan, measured on `replan_clock`.
    pub replan_budget: f64,
    pub replan_clock: Clock,
    pub updates: Vec<EnvironmentUpdate>,
    /// The physical world used for collisions and measurements during execution. `None`
    /// means the last scripted environment.
    pub world: Option<Environment>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioOutcome {
    ReachedGoal,
    MissedGoal,
    Collided { step: usize },
    ReplanFailed { step: usize },
}

#[derive(Debug, Clone)]
pub struct PlanRecord {
    /// Executed step at which the plan was made.
    pub step: usize,
    pub plan: MotionPlan,
}

#[derive(Debug, Clone)]
pub struct ScenarioLog {
    pub plans: Vec<PlanRecord>,
    pub update_steps: Vec<usize>,
    pub true_trajectory: Vec<DVector<f64>>,
    pub estimate_trajectory: Vec<DVector<f64>>,
    pub outcome: ScenarioOutcome,
}

impl ScenarioLog {
    /// `Err(ReplanFailed)` when the scenario stopped for lack of a plan.
    pub fn into_result(self) -> Result<Self> {
        match self.outcome {
            ScenarioOutcome::ReplanFailed { step } => Err(Error::ReplanFailed { step }),
            _ => Ok(self),
        }
    }
}

fn solve(
    env: &Environment,
    sys: &LinearSystem,
    start: &GaussianBelief,
    params: &PlannerParams,
    algo: Algorithm,
) -> Result<Option<MotionPlan>> {
    let r = plan(env, sys, start, params, algo)?;
    Ok(match r.status {
        PlanStatus::Solved => r.best_plan,
        PlanStatus::NoSolution => None,
    })
}

/// Plans, executes step by step and replans from the filter state `N(x̂, Σ⁺)` with `Λ = 0`
/// at each scripted update.
pub fn replan_scenario(scenario: &Scenario) -> Result<ScenarioLog> {
    let mut updates = scenario.updates.clone();
    updates.sort_by_key(|u| u.step);
    let world = scenario
        .world
        .clone()
        .or_else(|| updates.last().map(|u| u.env.clone()))
        .unwrap_or_else(|| scenario.env.clone());
    let sys = &scenario.sys;
    let roots = NoiseRoots::new(sys, &world)?;
    let k = world.position_dims();
    let mut rng = rollout_rng(scenario.seed, 0);
    let mut log = ScenarioLog {
        plans: Vec::new(),
        update_steps: Vec::new(),
        true_trajectory: Vec::new(),
        estimate_trajectory: Vec::new(),
        outcome: ScenarioOutcome::MissedGoal,
    };
    let Some(mut current) = solve(&scenario.env, sys, &scenario.start, &scenario.params, scenario.algorithm)? else {
        log.outcome = ScenarioOutcome::ReplanFailed { step: 0 };
        return Ok(log);
    };
    log.plans.push(PlanRecord { step: 0, plan: current.clone() });
    let mut env = scenario.env.clone();
    let mut state = ExecutionState::sample(current.start(), &mut rng)?;
    log.true_trajectory.push(state.x.clone());
    log.estimate_trajectory.push(state.estimate.clone());
    if in_collision(state.position(k), &world) {
        log.outcome = ScenarioOutcome::Collided { step: 0 };
        return Ok(log);
    }
    let mut step = 0;
    let mut index = 0;
    let mut next_update = 0;
    loop {
        while next_update < updates.len() && updates[next_update].step <= step {
            env = updates[next_update].env.clone();
            log.update_steps.push(step);
            next_update += 1;
            let n = sys.state_dim();
            let belief = GaussianBelief::new(state.estimate.clone(), state.sigma.clone(), DMatrix::zeros(n, n))?;
            let mut params = scenario.params.clone();
            params.time_budget = scenario.replan_budget;
            params.clock = scenario.replan_clock;
            params.iteration_budget = None;
            params.sampler.seed = scenario.params.sampler.seed.wrapping_add(next_update as u64);
            let replanned = crate::validity::is_valid(&belief, &env)
                .then(|| solve(&env, sys, &belief, &params, scenario.algorithm))
                .transpose()?
                .flatten();
            let Some(p) = replanned else {
                log.outcome = ScenarioOutcome::ReplanFailed { step };
                return Ok(log);
            };
            log.plans.push(PlanRecord { step, plan: p.clone() });
            current = p;
            index = 0;
        }
        if index >= current.len() {
            break;
        }
        advance(&mut state, &current.controls[index], &current.nominal_states[index], sys, &world, &roots, &mut rng)?;
        index += 1;
        step += 1;
        log.true_trajectory.push(state.x.clone());
        log.estimate_trajectory.push(state.estimate.clone());
        if in_collision(state.position(k), &world) {
            log.outcome = ScenarioOutcome::Collided { step };
            return Ok(log);
        }
    }
    log.outcome = if env.goal.contains(state.position(k)) {
        ScenarioOutcome::ReachedGoal
    } else {
        ScenarioOutcome::MissedGoal
    };
    Ok(log)
}
