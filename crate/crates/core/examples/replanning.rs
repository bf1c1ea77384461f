//! Executes the replanning script: part of a wall is unknown until step 5, after which the
//! robot has to detour through the measurement region to fit through the remaining gap.

use std::path::PathBuf;

use belief_trees::config::load_scenario;
use belief_trees::executor::replan_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/replan/scenario.toml");
    let mut scenario = load_scenario(path)?;
    let world = scenario.updates.last().unwrap().env.clone();
    for seed in 0..5 {
        scenario.seed = seed;
        scenario.params.sampler.seed = seed;
        let log = replan_scenario(&scenario)?;
        let visits: Vec<bool> = log.plans.iter().map(|p| p.plan.visits_measurement_region(&world)).collect();
        println!("seed {seed}: {:?}, plans visiting the region: {visits:?}", log.outcome);
    }
    Ok(())
}
