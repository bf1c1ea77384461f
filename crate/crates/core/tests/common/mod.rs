#![allow(dead_code)]

use std::path::PathBuf;

use belief_trees::belief::GaussianBelief;
use belief_trees::config::{load_problem, Problem};
use belief_trees::environment::{Environment, GoalRegion, MeasurementRegion};
use belief_trees::executor::{rollout, rollout_rng};
use belief_trees::geometry::{Aabb, ConvexPolygon};
use belief_trees::linalg::relative_frobenius;
use belief_trees::propagation::MotionPlan;
use belief_trees::system::LinearSystem;
use nalgebra::{DMatrix, DVector};

pub fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// The 2-D system layered under `env` with the effort-clock planner settings.
pub fn problem(env: &str) -> Problem {
    let c = configs();
    load_problem(&[c.join("system_2d.toml"), c.join(format!("{env}.toml")), c.join("planner_effort.toml")]).unwrap()
}

/// Scalar integrator A = B = C = 1, Q = R = 0.01, K = 0.5, measured everywhere. The
/// workspace is planar and the state supplies only its first coordinate.
pub fn scalar_setup() -> (LinearSystem, Environment) {
    let one = DMatrix::from_element(1, 1, 1.0);
    let sys = LinearSystem::new(
        one.clone(),
        one.clone(),
        one,
        DMatrix::from_element(1, 1, 0.01),
        Some(DMatrix::from_element(1, 1, 0.5)),
        DVector::from_element(1, -1.0),
        DVector::from_element(1, 1.0),
        1,
        50,
    )
    .unwrap();
    let env = Environment::new(
        Aabb::new(vec![-1e4, -1e4], vec![1e4, 1e4]).unwrap(),
        vec![],
        GoalRegion::Box(Aabb::new(vec![100.0, -1.0], vec![110.0, 1.0]).unwrap()),
        vec![MeasurementRegion {
            region: ConvexPolygon::rectangle(-1e5, -1e5, 1e5, 1e5).unwrap(),
            noise: DMatrix::from_element(1, 1, 0.01),
        }],
        0.05,
    )
    .unwrap();
    (sys, env)
}

/// The planar system of the benchmark environments, measured everywhere with R = 0.01 I.
pub fn planar_setup() -> (LinearSystem, Environment) {
    let sys = problem("env1").sys;
    let env = Environment::new(
        Aabb::new(vec![-1e4, -1e4], vec![1e4, 1e4]).unwrap(),
        vec![],
        GoalRegion::Box(Aabb::new(vec![100.0, 100.0], vec![110.0, 110.0]).unwrap()),
        vec![MeasurementRegion {
            region: ConvexPolygon::rectangle(-1e5, -1e5, 1e5, 1e5).unwrap(),
            noise: DMatrix::identity(2, 2) * 0.01,
        }],
        0.05,
    )
    .unwrap();
    (sys, env)
}

/// Worst relative Frobenius errors of the ensemble second moments of `x − x̂` against Σ⁺
/// and of `x̂ − x̌` against Λ⁺, at each requested step.
pub fn ensemble_errors(
    plan: &MotionPlan,
    sys: &LinearSystem,
    env: &Environment,
    runs: usize,
    seed: u64,
    steps: &[usize],
) -> Vec<(usize, f64, f64)> {
    let n = sys.state_dim();
    let mut err = vec![DMatrix::<f64>::zeros(n, n); steps.len()];
    let mut disp = vec![DMatrix::<f64>::zeros(n, n); steps.len()];
    for i in 0..runs {
        let r = rollout(plan, sys, env, &mut rollout_rng(seed, i as u64)).unwrap();
        assert!(!r.collided());
        for (j, &k) in steps.iter().enumerate() {
            let e = &r.true_trajectory[k] - &r.estimate_trajectory[k];
            let d = &r.estimate_trajectory[k] - &plan.nominal_states[k];
            err[j] += &e * e.transpose();
            disp[j] += &d * d.transpose();
        }
    }
    steps
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let b = &plan.beliefs[k];
            (
                k,
                relative_frobenius(&(&err[j] / runs as f64), b.sigma()),
                relative_frobenius(&(&disp[j] / runs as f64), b.lambda()),
            )
        })
        .collect()
}

/// A straight plan of `steps` copies of `u` from `start`.
pub fn straight_plan(start: &GaussianBelief, u: &[f64], steps: usize, sys: &LinearSystem, env: &Environment) -> MotionPlan {
    MotionPlan::from_controls(start, vec![DVector::from_row_slice(u); steps], sys, env).unwrap()
}
