//! Runs a planned path in closed loop ten thousand times and checks the empirical
//! per-step collision rates against the chance constraint.

use std::path::PathBuf;

use belief_trees::config::load_problem;
use belief_trees::executor::estimate_chance;
use belief_trees::planner::plan;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let prob = load_problem(&[
        configs.join("system_2d.toml"),
        configs.join("env3.toml"),
        configs.join("planner_effort.toml"),
    ])?;
    let r = plan(&prob.env, &prob.sys, &prob.start, &prob.params, prob.algorithm)?;
    let Some(best) = r.best_plan else {
        println!("no plan found");
        return Ok(());
    };
    let est = estimate_chance(&best, &prob.sys, &prob.env, 10_000, 42)?;
    let worst = (0..best.len()).max_by(|&a, &b| est.collision_rate(a).total_cmp(&est.collision_rate(b))).unwrap();
    let (lo, hi) = est.collision_interval(worst);
    println!("plan with {} steps, cost {:.1}", best.len(), best.cost);
    println!("worst step {worst}: collision rate {:.4}, 99% interval [{lo:.4}, {hi:.4}], delta {}", est.collision_rate(worst), prob.env.delta);
    println!("runs with any collision: {}", est.collided_runs);
    println!("goal reached: {:.4}", est.goal_rate());
    Ok(())
}
