use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use belief_trees::artifacts::{read_plan_csv, write_plan_csv, write_svg};
use belief_trees::bench::{run_benchmark, BenchmarkSpec};
use belief_trees::config::{load_problem, load_scenario, Problem};
use belief_trees::error::{Error, Result};
use belief_trees::executor::{estimate_chance, replan_scenario, ScenarioOutcome};
use belief_trees::metric::MetricKind;
use belief_trees::planner::{plan, Algorithm, Clock, PlanStatus};

#[derive(Parser)]
#[command(name = "belief-trees", version, about = "Chance-constrained belief-space planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan once and write the plan CSV, an SVG and the cost history.
    Plan {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a benchmark spec and write the summary CSV.
    Bench {
        spec: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
    },
    /// Execute a plan file in closed loop many times and report empirical risks.
    Simulate {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional per-step CSV of collision counts and Wilson bounds.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replanning script.
    Replan {
        script: PathBuf,
        /// Seeds both the planners and the simulated execution.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem files, later ones overriding earlier tables.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<MetricKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p_bias: Option<f64>,
    #[arg(long)]
    p_goal: Option<f64>,
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    iteration_budget: Option<usize>,
    #[arg(long)]
    iterations_per_second: Option<f64>,
    #[arg(long)]
    sst_delta_bn: Option<f64>,
    #[arg(long)]
    sst_delta_s: Option<f64>,
    #[arg(long)]
    extend_candidates: Option<usize>,
    #[arg(long)]
    stop_at_first: bool,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    match s {
        "belief_rrt" | "rrt" => Ok(Algorithm::BeliefRrt),
        "belief_sst" | "sst" => Ok(Algorithm::BeliefSst),
        _ => Err(format!("unknown algorithm {s:?} (belief_rrt, belief_sst)")),
    }
}

fn parse_metric(s: &str) -> std::result::Result<MetricKind, String> {
    match s {
        "wasserstein2" | "w2" => Ok(MetricKind::Wasserstein2),
        "euclidean_mean" | "l2" => Ok(MetricKind::EuclideanMean),
        _ => Err(format!("unknown metric {s:?} (wasserstein2, euclidean_mean)")),
    }
}

impl ProblemArgs {
    fn load(&self) -> Result<Problem> {
        let mut p = load_problem(&self.configs)?;
        let params = &mut p.params;
        if let Some(a) = self.algorithm {
            p.algorithm = a;
        }
        if let Some(m) = self.metric {
            params.metric = m;
        }
        if let Some(s) = self.seed {
            params.sampler.seed = s;
        }
        if let Some(b) = self.p_bias {
            params.sampler.p_bias = b;
        }
        if let Some(g) = self.p_goal {
            params.sampler.p_goal = g;
        }
        if let Some(t) = self.time_budget {
            params.time_budget = t;
        }
        if self.iteration_budget.is_some() {
            params.iteration_budget = self.iteration_budget;
        }
        if let Some(r) = self.iterations_per_second {
            params.clock = Clock::Effort { iterations_per_second: r };
        }
        if let Some(v) = self.sst_delta_bn {
            params.sst_delta_bn = v;
        }
        if let Some(v) = self.sst_delta_s {
            params.sst_delta_s = v;
        }
        if let Some(v) = self.extend_candidates {
            params.extend_candidates = v;
        }
        params.stop_at_first |= self.stop_at_first;
        params.validate(&p.sys, &p.env)?;
        Ok(p)
    }
}

fn status_label(s: PlanStatus) -> &'static str {
    match s {
        PlanStatus::Solved => "solved",
        PlanStatus::NoSolution => "no_solution",
    }
}

fn run_plan(args: &ProblemArgs, out: &Path) -> Result<()> {
    let p = args.load()?;
    let r = plan(&p.env, &p.sys, &p.start, &p.params, p.algorithm)?;
    fs::create_dir_all(out)?;
    let mut history = csv::Writer::from_path(out.join("cost_history.csv"))?;
    history.write_record(["time", "iteration", "cost", "time_wall_s"])?;
    for s in &r.cost_history {
        history.write_record([s.time.to_string(), s.iteration.to_string(), s.cost.to_string(), s.wall_s.to_string()])?;
    }
    history.flush()?;
    let plans: Vec<_> = r.best_plan.iter().collect();
    write_svg(&p.env, p.start.mean().as_slice(), &plans, out.join("plan.svg"))?;
    if let Some(best) = &r.best_plan {
        write_plan_csv(best, out.join("plan.csv"))?;
    }
    println!("status={}", status_label(r.status));
    println!("algorithm={}", p.algorithm.label());
    println!("iterations={}", r.stats.iterations);
    if let Some(f) = r.first_solution {
        println!("first_solution_time={} first_solution_iteration={} first_solution_cost={}", f.time, f.iteration, f.cost);
    }
    if let Some(best) = &r.best_plan {
        println!("cost={} steps={}", best.cost, best.len());
    }
    println!("out={}", out.display());
    Ok(())
}

fn run_bench(spec: &Path, trials: Option<usize>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec = BenchmarkSpec::load(spec)?;
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    let result = run_benchmark(&spec)?;
    result.write_csv(out)?;
    for c in &result.cells {
        println!("{} {}: solved {}/{}", c.environment, c.variant.label(), c.solved, c.trials);
    }
    println!("out={}", out.display());
    Ok(())
}

fn run_simulate(configs: &[PathBuf], plan_path: &Path, trials: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let p = load_problem(configs)?;
    if trials < 100 {
        return Err(Error::Invalid("simulate needs at least 100 trials".into()));
    }
    let file = read_plan_csv(plan_path)?;
    let replayed = file.replay(&p.sys, &p.env)?;
    let drift = replayed
        .beliefs
        .iter()
        .zip(&file.beliefs)
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    let e = estimate_chance(&replayed, &p.sys, &p.env, trials, seed)?;
    if let Some(out) = out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["step", "collisions", "rate", "wilson99_low", "wilson99_high"])?;
        for k in 0..e.collisions_per_step.len() {
            let (lo, hi) = e.collision_interval(k);
            w.write_record([
                k.to_string(),
                e.collisions_per_step[k].to_string(),
                e.collision_rate(k).to_string(),
                lo.to_string(),
                hi.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let (glo, ghi) = e.goal_interval();
    println!("status=ok");
    println!("replay_max_abs_diff={drift:e}");
    println!("trials={} steps={}", e.trials, replayed.len());
    println!("worst_step_collision_rate={} worst_step_wilson99_high={}", e.worst_collision_rate(), e.worst_collision_upper());
    println!("delta={}", p.env.delta);
    println!("goal_rate={} goal_wilson99=[{glo}, {ghi}]", e.goal_rate());
    println!("collision_free_goal_rate={}", e.successes as f64 / e.trials as f64);
    Ok(())
}

fn run_replan(script: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut s = load_scenario(script)?;
    if let Some(seed) = seed {
        s.seed = seed;
        s.params.sampler.seed = seed;
    }
    let log = replan_scenario(&s)?;
    fs::create_dir_all(out)?;
    let world = s.world.clone().or_else(|| s.updates.last().map(|u| u.env.clone())).unwrap_or_else(|| s.env.clone());
    for (i, rec) in log.plans.iter().enumerate() {
        write_plan_csv(&rec.plan, out.join(format!("plan_{i}.csv")))?;
        write_svg(&world, rec.plan.start().mean().as_slice(), &[&rec.plan], out.join(format!("plan_{i}.svg")))?;
    }
    let mut w = csv::Writer::from_path(out.join("trajectory.csv"))?;
    let n = s.sys.state_dim();
    let mut header = vec!["step".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..n).map(|i| format!("estimate{i}")));
    w.write_record(&header)?;
    for (k, (x, e)) in log.true_trajectory.iter().zip(&log.estimate_trajectory).enumerate() {
        let mut r = vec![k.to_string()];
        r.extend(x.iter().map(f64::to_string));
        r.extend(e.iter().map(f64::to_string));
        w.write_record(r)?;
    }
    w.flush()?;
    let outcome = match log.outcome {
        ScenarioOutcome::ReachedGoal => "reached_goal".to_string(),
        ScenarioOutcome::MissedGoal => "missed_goal".to_string(),
        ScenarioOutcome::Collided { step } => format!("collided step={step}"),
        ScenarioOutcome::ReplanFailed { step } => format!("replan_failed step={step}"),
    };
    println!("status={outcome}");
    println!("plans={} updates_at={:?}", log.plans.len(), log.update_steps);
    for (i, rec) in log.plans.iter().enumerate() {
        println!(
            "plan {i}: step={} cost={} visits_measurement_region={}",
            rec.step,
            rec.plan.cost,
            rec.plan.visits_measurement_region(&world)
        );
    }
    println!("out={}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { problem, out } => run_plan(problem, out),
        Command::Bench { spec, trials, master_seed, out } => run_bench(spec, *trials, *master_seed, out),
        Command::Simulate { configs, plan, trials, seed, out } => {
            run_simulate(configs, plan, *trials, *seed, out.as_deref())
        }
        Command::Replan { script, seed, out } => run_replan(script, *seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } | Error::Validation { .. } | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
