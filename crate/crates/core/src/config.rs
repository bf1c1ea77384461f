//! TOML problem files.
//!
//! A problem file may hold any of the tables `[environment]`, `[system]`, `[start]`,
//! `[sampler]` and `[planner]`, plus an `include = [...]` list of other problem files
//! (paths relative to the including file). Included files are read first; a table given
//! in a later file replaces the whole table from an earlier one. See `configs/README.md`
//! for the full key list.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use toml::Spanned;

use crate::belief::GaussianBelief;
use crate::environment::{Environment, GoalRegion, MeasurementMembership, MeasurementRegion, RiskAllocation};
use crate::error::{Error, Result};
use crate::executor::{EnvironmentUpdate, Scenario};
use crate::geometry::{Aabb, ConvexPolygon};
use crate::metric::MetricKind;
use crate::planner::{Algorithm, Clock, NearestSearch, PlannerParams};
use crate::sampling::{compute_lambda_max, SamplerParams, DEFAULT_LAMBDA_CAP, DEFAULT_LOW_FRACTION};
use crate::system::LinearSystem;
use crate::validity::is_valid;

/// Everything needed to run the planner once.
#[derive(Debug, Clone)]
pub struct Problem {
    pub env: Environment,
    pub sys: LinearSystem,
    pub start: GaussianBelief,
    pub params: PlannerParams,
    pub algorithm: Algorithm,
}

#[derive(Debug)]
struct Source {
    path: PathBuf,
    text: String,
}

impl Source {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn invalid(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Validation { path: self.path.clone(), line: self.line(offset), message: message.into() }
    }
}

/// A table together with the file it came from.
struct Located<T> {
    src: Arc<Source>,
    table: Spanned<T>,
}

impl<T> Located<T> {
    fn at(&self) -> usize {
        self.table.span().start
    }

    fn invalid(&self, message: impl Into<String>) -> Error {
        self.src.invalid(self.at(), message)
    }

    fn wrap(&self, e: Error) -> Error {
        match e {
            Error::Validation { .. } | Error::Parse { .. } | Error::Io(_) => e,
            other => self.invalid(other.to_string()),
        }
    }
}

type Matrix = Spanned<Vec<Vec<f64>>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    include: Vec<String>,
    environment: Option<Spanned<RawEnvironment>>,
    system: Option<Spanned<RawSystem>>,
    start: Option<Spanned<RawStart>>,
    sampler: Option<Spanned<RawSampler>>,
    planner: Option<Spanned<RawPlanner>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawEnvironment {
    lower: Vec<f64>,
    upper: Vec<f64>,
    delta: f64,
    #[serde(default)]
    risk_allocation: Option<String>,
    /// Absent: nominal-state membership.
    #[serde(default)]
    membership_level: Option<f64>,
    goal: Spanned<RawGoal>,
    #[serde(default, rename = "obstacle")]
    obstacles: Vec<Spanned<RawPolygon>>,
    #[serde(default, rename = "measurement_region")]
    measurement_regions: Vec<Spanned<RawRegion>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGoal {
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    center: Option<Vec<f64>>,
    radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolygon {
    vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    vertices: Vec<[f64; 2]>,
    noise: Matrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    q: Matrix,
    k: Option<Matrix>,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    min_steps: usize,
    max_steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStart {
    mean: Vec<f64>,
    sigma: Matrix,
    lambda: Option<Matrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LambdaMax {
    Auto(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampler {
    lambda_max: Spanned<LambdaMax>,
    lambda_low: Option<Vec<f64>>,
    #[serde(default)]
    p_bias: f64,
    #[serde(default = "default_p_goal")]
    p_goal: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    extra_lower: Vec<f64>,
    #[serde(default)]
    extra_upper: Vec<f64>,
}

fn default_p_goal() -> f64 {
    0.05
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlanner {
    algorithm: Option<Algorithm>,
    metric: Option<MetricKind>,
    sst_delta_bn: Option<f64>,
    sst_delta_s: Option<f64>,
    extend_candidates: Option<usize>,
    time_budget: Option<f64>,
    iteration_budget: Option<usize>,
    /// Present: budgets and cutoffs are measured in iterations at this rate.
    iterations_per_second: Option<f64>,
    stop_at_first: Option<bool>,
    nearest: Option<String>,
    grid_cell: Option<f64>,
}

/// The tables of a problem file after resolving includes.
struct Layers {
    environment: Option<Located<RawEnvironment>>,
    system: Option<Located<RawSystem>>,
    start: Option<Located<RawStart>>,
    sampler: Option<Located<RawSampler>>,
    planner: Option<Located<RawPlanner>>,
}

impl Layers {
    fn overlay(&mut self, top: Layers) {
        self.environment = top.environment.or(self.environment.take());
        self.system = top.system.or(self.system.take());
        self.start = top.start.or(self.start.take());
        self.sampler = top.sampler.or(self.sampler.take());
        self.planner = top.planner.or(self.planner.take());
    }
}

fn read_source(path: &Path) -> Result<Arc<Source>> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(Arc::new(Source { path: path.to_path_buf(), text }))
}

fn parse_file(src: &Arc<Source>) -> Result<RawFile> {
    toml::from_str(&src.text).map_err(|e| Error::Parse {
        path: src.path.clone(),
        line: e.span().map_or(1, |s| src.line(s.start)),
        message: e.message().trim().to_string(),
    })
}

fn load_layers(path: &Path, depth: usize) -> Result<Layers> {
    let src = read_source(path)?;
    if depth > 16 {
        return Err(src.invalid(0, "include nesting deeper than 16 levels"));
    }
    let raw = parse_file(&src)?;
    let mut layers = Layers { environment: None, system: None, start: None, sampler: None, planner: None };
    let dir = path.parent().unwrap_or(Path::new("."));
    for inc in &raw.include {
        layers.overlay(load_layers(&dir.join(inc), depth + 1)?);
    }
    if let Some(t) = raw.environment {
        layers.environment = Some(Located { src: src.clone(), table: t });
    }
    if let Some(t) = raw.system {
        layers.system = Some(Located { src: src.clone(), table: t });
    }
    if let Some(t) = raw.start {
        layers.start = Some(Located { src: src.clone(), table: t });
    }
    if let Some(t) = raw.sampler {
        layers.sampler = Some(Located { src: src.clone(), table: t });
    }
    if let Some(t) = raw.planner {
        layers.planner = Some(Located { src: src.clone(), table: t });
    }
    Ok(layers)
}

fn missing(path: &Path, table: &str) -> Error {
    Error::Validation { path: path.to_path_buf(), line: 1, message: format!("missing [{table}] table") }
}

fn matrix(src: &Source, m: &Matrix, rows: usize, cols: usize, name: &str) -> Result<DMatrix<f64>> {
    let v = m.get_ref();
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(src.invalid(m.span().start, format!("{name} must be {rows}x{cols}")));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| v[i][j]))
}

fn square(src: &Source, m: &Matrix, name: &str) -> Result<DMatrix<f64>> {
    let n = m.get_ref().len();
    matrix(src, m, n, n, name)
}

fn environment(l: &Located<RawEnvironment>) -> Result<Environment> {
    let src = &l.src;
    let raw = l.table.get_ref();
    let bounds = Aabb::new(raw.lower.clone(), raw.upper.clone()).map_err(|e| l.wrap(e))?;
    let g = raw.goal.get_ref();
    let at_goal = raw.goal.span().start;
    let goal = match (&g.lower, &g.upper, &g.center, g.radius) {
        (Some(lo), Some(hi), None, None) => GoalRegion::Box(
            Aabb::new(lo.clone(), hi.clone())
                .map_err(|e| src.invalid(at_goal, e.to_string()))?,
        ),
        (None, None, Some(c), Some(r)) => GoalRegion::Disc { center: DVector::from_vec(c.clone()), radius: r },
        _ => return Err(src.invalid(at_goal, "goal needs either lower/upper or center/radius")),
    };
    let mut obstacles = Vec::new();
    for o in &raw.obstacles {
        obstacles.push(
            ConvexPolygon::new(o.get_ref().vertices.clone())
                .map_err(|e| src.invalid(o.span().start, format!("obstacle: {e}")))?,
        );
    }
    let mut regions = Vec::new();
    for r in &raw.measurement_regions {
        let at = r.span().start;
        let region = ConvexPolygon::new(r.get_ref().vertices.clone())
            .map_err(|e| src.invalid(at, format!("measurement region: {e}")))?;
        let noise = square(src, &r.get_ref().noise, "noise")?;
        regions.push(MeasurementRegion { region, noise });
    }
    let risk_allocation = match raw.risk_allocation.as_deref() {
        None | Some("union") => RiskAllocation::Union,
        Some("per_obstacle") => RiskAllocation::PerObstacle,
        Some(other) => return Err(l.invalid(format!("unknown risk_allocation {other:?}"))),
    };
    let membership = match raw.membership_level {
        None => MeasurementMembership::Nominal,
        Some(level) => MeasurementMembership::Probabilistic { level },
    };
    let env = Environment {
        bounds,
        obstacles,
        goal,
        measurement_regions: regions,
        delta: raw.delta,
        risk_allocation,
        membership,
    };
    env.validate().map_err(|e| l.wrap(e))?;
    Ok(env)
}

fn system(l: &Located<RawSystem>, env: &Environment) -> Result<LinearSystem> {
    let src = &l.src;
    let raw = l.table.get_ref();
    let a = square(src, &raw.a, "a")?;
    let n = a.nrows();
    let m = raw.u_min.len();
    let b = matrix(src, &raw.b, n, m, "b")?;
    let p = raw.c.get_ref().len();
    let c = matrix(src, &raw.c, p, n, "c")?;
    let q = matrix(src, &raw.q, n, n, "q")?;
    let k = raw.k.as_ref().map(|k| matrix(src, k, m, n, "k")).transpose()?;
    if let Some(r) = env.measurement_regions.first() {
        if r.noise.nrows() != p {
            return Err(l.invalid(format!(
                "c has {p} rows but measurement noise is {}x{}",
                r.noise.nrows(),
                r.noise.ncols()
            )));
        }
    }
    if n < env.position_dims() {
        return Err(l.invalid("state is smaller than the workspace"));
    }
    LinearSystem::new(
        a,
        b,
        c,
        q,
        k,
        DVector::from_vec(raw.u_min.clone()),
        DVector::from_vec(raw.u_max.clone()),
        raw.min_steps,
        raw.max_steps,
    )
    .map_err(|e| l.wrap(e))
}

fn start(l: &Located<RawStart>, sys: &LinearSystem, env: &Environment) -> Result<GaussianBelief> {
    let raw = l.table.get_ref();
    let n = sys.state_dim();
    let sigma = matrix(&l.src, &raw.sigma, n, n, "sigma")?;
    let lambda = match &raw.lambda {
        Some(m) => matrix(&l.src, m, n, n, "lambda")?,
        None => DMatrix::zeros(n, n),
    };
    if raw.mean.len() != n {
        return Err(l.invalid(format!("mean must have {n} entries")));
    }
    let b = GaussianBelief::new(DVector::from_vec(raw.mean.clone()), sigma, lambda).map_err(|e| l.wrap(e))?;
    if !is_valid(&b, env) {
        return Err(l.invalid("start belief violates the chance constraint"));
    }
    Ok(b)
}

fn sampler(l: &Located<RawSampler>, sys: &LinearSystem, env: &Environment) -> Result<SamplerParams> {
    let raw = l.table.get_ref();
    let n = sys.state_dim();
    let lambda_max = match raw.lambda_max.get_ref() {
        LambdaMax::Values(v) => v.clone(),
        LambdaMax::Auto(s) if s == "auto" => {
            compute_lambda_max(env, env.delta, n, DEFAULT_LAMBDA_CAP).map_err(|e| l.wrap(e))?
        }
        LambdaMax::Auto(s) => {
            return Err(l.src.invalid(raw.lambda_max.span().start, format!("lambda_max {s:?} is neither a list nor \"auto\"")))
        }
    };
    let lambda_low = raw
        .lambda_low
        .clone()
        .unwrap_or_else(|| lambda_max.iter().map(|x| x * DEFAULT_LOW_FRACTION).collect());
    let params = SamplerParams {
        lambda_max,
        lambda_low,
        p_bias: raw.p_bias,
        p_goal: raw.p_goal,
        seed: raw.seed,
        extra_lower: raw.extra_lower.clone(),
        extra_upper: raw.extra_upper.clone(),
    };
    params.validate(n, env.position_dims()).map_err(|e| l.wrap(e))?;
    Ok(params)
}

fn planner(l: Option<&Located<RawPlanner>>, sampler: SamplerParams) -> Result<(PlannerParams, Algorithm)> {
    let mut params = PlannerParams::new(sampler);
    let Some(l) = l else {
        return Ok((params, Algorithm::BeliefSst));
    };
    let raw = l.table.get_ref();
    if let Some(m) = raw.metric {
        params.metric = m;
    }
    if let Some(v) = raw.sst_delta_bn {
        params.sst_delta_bn = v;
    }
    if let Some(v) = raw.sst_delta_s {
        params.sst_delta_s = v;
    }
    if let Some(v) = raw.extend_candidates {
        params.extend_candidates = v;
    }
    if let Some(v) = raw.time_budget {
        params.time_budget = v;
    }
    params.iteration_budget = raw.iteration_budget;
    if let Some(rate) = raw.iterations_per_second {
        params.clock = Clock::Effort { iterations_per_second: rate };
    }
    if let Some(v) = raw.stop_at_first {
        params.stop_at_first = v;
    }
    match raw.nearest.as_deref() {
        None => {}
        Some("grid") => params.nearest = NearestSearch::Grid,
        Some("linear") => params.nearest = NearestSearch::Linear,
        Some(other) => return Err(l.invalid(format!("unknown nearest search {other:?}"))),
    }
    if let Some(v) = raw.grid_cell {
        params.grid_cell = v;
    }
    Ok((params, raw.algorithm.unwrap_or(Algorithm::BeliefSst)))
}

/// Reads a problem file (with its includes) and validates every table.
pub fn load_config(path: impl AsRef<Path>) -> Result<Problem> {
    load_problem(&[path.as_ref()])
}

/// Like [`load_config`] for several files layered in order, later tables replacing
/// earlier ones.
pub fn load_problem<P: AsRef<Path>>(paths: &[P]) -> Result<Problem> {
    let Some(last) = paths.last() else {
        return Err(Error::Invalid("no configuration files given".into()));
    };
    let path = last.as_ref();
    let mut layers = Layers { environment: None, system: None, start: None, sampler: None, planner: None };
    for p in paths {
        layers.overlay(load_layers(p.as_ref(), 0)?);
    }
    let env_l = layers.environment.as_ref().ok_or_else(|| missing(path, "environment"))?;
    let env = environment(env_l)?;
    let sys_l = layers.system.as_ref().ok_or_else(|| missing(path, "system"))?;
    let sys = system(sys_l, &env)?;
    let start_l = layers.start.as_ref().ok_or_else(|| missing(path, "start"))?;
    let start = start(start_l, &sys, &env)?;
    let sampler_l = layers.sampler.as_ref().ok_or_else(|| missing(path, "sampler"))?;
    let sampler = sampler(sampler_l, &sys, &env)?;
    let (params, algorithm) = planner(layers.planner.as_ref(), sampler)?;
    if let Some(l) = &layers.planner {
        params.validate(&sys, &env).map_err(|e| l.wrap(e))?;
    }
    Ok(Problem { env, sys, start, params, algorithm })
}

/// Reads only the `[environment]` table of a file (with includes), e.g. for scenario updates.
pub fn load_environment(path: impl AsRef<Path>) -> Result<Environment> {
    let path = path.as_ref();
    let layers = load_layers(path, 0)?;
    let l = layers.environment.as_ref().ok_or_else(|| missing(path, "environment"))?;
    environment(l)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    problem: Vec<PathBuf>,
    replan_budget: f64,
    replan_clock: Option<Spanned<String>>,
    #[serde(default)]
    seed: u64,
    world: Option<PathBuf>,
    #[serde(default, rename = "update")]
    updates: Vec<Spanned<RawUpdate>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUpdate {
    step: usize,
    environment: PathBuf,
}

/// Reads a replanning script: the layered problem files, a per-replan budget, and a list
/// of `(step, environment file)` updates. Paths are relative to the script.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let src = read_source(path)?;
    let raw: RawScenario = toml::from_str(&src.text).map_err(|e| Error::Parse {
        path: src.path.clone(),
        line: e.span().map_or(1, |s| src.line(s.start)),
        message: e.message().trim().to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let files: Vec<PathBuf> = raw.problem.iter().map(|p| dir.join(p)).collect();
    let prob = load_problem(&files)?;
    if !(raw.replan_budget > 0.0) {
        return Err(src.invalid(0, "replan_budget must be positive"));
    }
    let replan_clock = match &raw.replan_clock {
        None => prob.params.clock,
        Some(c) => match c.get_ref().as_str() {
            "wall" => Clock::Wall,
            "effort" => prob.params.clock,
            other => {
                return Err(src.invalid(c.span().start, format!("unknown replan_clock {other:?} (wall, effort)")));
            }
        },
    };
    let mut updates = Vec::new();
    for u in &raw.updates {
        let env = load_environment(dir.join(&u.get_ref().environment))?;
        if env.position_dims() != prob.env.position_dims() {
            return Err(src.invalid(u.span().start, "update changes the workspace dimension"));
        }
        updates.push(EnvironmentUpdate { step: u.get_ref().step, env });
    }
    let world = raw.world.map(|w| load_environment(dir.join(w))).transpose()?;
    Ok(Scenario {
        env: prob.env,
        sys: prob.sys,
        start: prob.start,
        params: prob.params,
        algorithm: prob.algorithm,
        replan_budget: raw.replan_budget,
        replan_clock,
        updates,
        world,
        seed: raw.seed,
    })
}
