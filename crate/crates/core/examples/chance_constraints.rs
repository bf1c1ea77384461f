//! Collision-probability bounds for a belief approaching a square obstacle, next to a
//! Monte Carlo estimate.

use belief_trees::belief::GaussianBelief;
use belief_trees::geometry::ConvexPolygon;
use belief_trees::validity::obstacle_collision_bound;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let square = ConvexPolygon::rectangle(0.0, 0.0, 2.0, 2.0).unwrap();
    let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.3]);
    let l = cov.clone().cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    println!("{:>6} {:>10} {:>10}", "gap", "bound", "sampled");
    for gap in [3.0, 2.0, 1.5, 1.0, 0.5, 0.0] {
        let mean = DVector::from_vec(vec![-gap, 1.0]);
        let b = GaussianBelief::from_covariance(mean.clone(), cov.clone()).unwrap();
        let hits = (0..n)
            .filter(|_| {
                let z = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
                let p = &mean + &l * z;
                square.contains([p[0], p[1]])
            })
            .count();
        println!("{gap:>6.1} {:>10.5} {:>10.5}", obstacle_collision_bound(&b, &square), hits as f64 / n as f64);
    }
}
