//! Plans through the walled environment with belief-SST and writes the plan and a picture.
//!
//! Usage: `cargo run --release --example plan_environment [env1|env2|env3] [seed]`

use std::path::PathBuf;

use belief_trees::artifacts::{write_plan_csv, write_svg};
use belief_trees::config::load_problem;
use belief_trees::planner::{plan, PlanStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let env = args.next().unwrap_or_else(|| "env2".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut prob = load_problem(&[
        configs.join("system_2d.toml"),
        configs.join(format!("{env}.toml")),
        configs.join("planner_effort.toml"),
    ])?;
    prob.params.sampler.seed = seed;

    let r = plan(&prob.env, &prob.sys, &prob.start, &prob.params, prob.algorithm)?;
    println!("{} on {env}: {:?} after {} iterations", prob.algorithm.label(), r.status, r.stats.iterations);
    for s in &r.cost_history {
        println!("  t = {:>7.3}  cost = {:.2}", s.time, s.cost);
    }
    if r.status == PlanStatus::Solved {
        let best = r.best_plan.as_ref().unwrap();
        println!("measurement region visited: {}", best.visits_measurement_region(&prob.env));
        let out = std::env::temp_dir().join(format!("belief_trees_{env}"));
        std::fs::create_dir_all(&out)?;
        write_plan_csv(best, out.join("plan.csv"))?;
        write_svg(&prob.env, prob.start.mean().as_slice(), &[best], out.join("plan.svg"))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
