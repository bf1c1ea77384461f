//! Draws belief samples the way the planners do and summarizes the covariance spectra.

use belief_trees::environment::{Environment, GoalRegion};
use belief_trees::geometry::Aabb;
use belief_trees::sampling::{sample_covariance_with_spectrum, sample_orthogonal, BeliefSampler, SamplerParams};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let o = sample_orthogonal(3, &mut rng);
    let err = (o.transpose() * &o - DMatrix::identity(3, 3)).abs().max();
    println!("random 3x3 rotation, max |O^T O - I| = {err:.2e}");

    let mut params = SamplerParams::new(vec![10.0, 10.0], 0.2, 0.05, 11);
    params.lambda_low = vec![0.1, 0.1];
    let mut biased = 0;
    let mut trace = 0.0;
    let n = 10_000;
    for _ in 0..n {
        let s = sample_covariance_with_spectrum(&params, &mut rng);
        biased += s.biased as usize;
        trace += s.matrix.trace();
    }
    println!("{n} covariances: {biased} low-uncertainty draws, mean trace {:.3}", trace / n as f64);

    let env = Environment::new(
        Aabb::new(vec![0.0, 0.0], vec![100.0, 100.0]).unwrap(),
        vec![],
        GoalRegion::Box(Aabb::new(vec![80.0, 80.0], vec![95.0, 95.0]).unwrap()),
        vec![],
        0.05,
    )
    .unwrap();
    let mut sampler = BeliefSampler::new(params);
    let in_goal = (0..n)
        .filter(|_| env.goal.contains(sampler.sample(&env).mean().as_slice()))
        .count();
    println!("{in_goal} of {n} belief means fell in the goal box");
}
