//! Grid-accelerated nearest-belief queries agree with a linear scan.

use std::time::Instant;

use belief_trees::belief::GaussianBelief;
use belief_trees::environment::GoalRegion;
use belief_trees::geometry::Aabb;
use belief_trees::metric::MetricKind;
use belief_trees::planner::{BeliefIndex, NearestSearch};
use belief_trees::sampling::{sample_covariance, sample_mean, SamplerParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let bounds = Aabb::new(vec![0.0, 0.0], vec![100.0, 100.0]).unwrap();
    let goal = GoalRegion::Box(Aabb::new(vec![80.0, 80.0], vec![95.0, 95.0]).unwrap());
    let params = SamplerParams::new(vec![10.0, 10.0], 0.2, 0.0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = || {
        let m = sample_mean(&bounds, &goal, &params, &mut rng);
        GaussianBelief::from_covariance(m, sample_covariance(&params, &mut rng)).unwrap()
    };
    let beliefs: Vec<GaussianBelief> = (0..20_000).map(|_| draw()).collect();
    let queries: Vec<GaussianBelief> = (0..2_000).map(|_| draw()).collect();

    for kind in [NearestSearch::Linear, NearestSearch::Grid] {
        let mut index = BeliefIndex::new(kind, &bounds, 5.0);
        for (i, b) in beliefs.iter().enumerate() {
            index.insert(i, b);
        }
        let t = Instant::now();
        let found: Vec<usize> = queries
            .iter()
            .map(|q| index.nearest(q, MetricKind::Wasserstein2, |i| &beliefs[i]).unwrap().0)
            .collect();
        println!("{kind:?}: {} queries in {:.1} ms, first answers {:?}", queries.len(), t.elapsed().as_secs_f64() * 1e3, &found[..5]);
    }
}
