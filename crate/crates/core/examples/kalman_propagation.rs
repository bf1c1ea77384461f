//! Follows one straight edge through a measurement region and prints how the estimation
//! error covariance Σ and the estimate dispersion Λ evolve.

use belief_trees::belief::GaussianBelief;
use belief_trees::environment::{Environment, GoalRegion, MeasurementRegion};
use belief_trees::geometry::{Aabb, ConvexPolygon};
use belief_trees::propagation::propagate_edge;
use belief_trees::system::LinearSystem;
use nalgebra::{DMatrix, DVector};

fn main() {
    let sys = LinearSystem::single_integrator_2d(0.05, 1.0, 1, 40).unwrap();
    let env = Environment::new(
        Aabb::new(vec![0.0, 0.0], vec![40.0, 10.0]).unwrap(),
        vec![],
        GoalRegion::Box(Aabb::new(vec![35.0, 0.0], vec![40.0, 10.0]).unwrap()),
        vec![MeasurementRegion {
            region: ConvexPolygon::rectangle(15.0, 0.0, 20.0, 10.0).unwrap(),
            noise: DMatrix::identity(2, 2) * 0.01,
        }],
        0.05,
    )
    .unwrap();
    let start = GaussianBelief::from_covariance(DVector::from_vec(vec![2.0, 5.0]), DMatrix::identity(2, 2) * 0.05).unwrap();
    let controls = vec![DVector::from_vec(vec![1.0, 0.0]); 30];
    let (beliefs, states) = propagate_edge(&start, start.mean(), &controls, &sys, &env).unwrap();
    println!("{:>4} {:>6} {:>9} {:>9} {:>9}", "step", "x", "Sigma_xx", "Lambda_xx", "total_xx");
    for (k, (b, x)) in beliefs.iter().zip(&states).enumerate() {
        println!(
            "{:>4} {:>6.1} {:>9.4} {:>9.4} {:>9.4}",
            k + 1,
            x[0],
            b.sigma()[(0, 0)],
            b.lambda()[(0, 0)],
            b.total_covariance()[(0, 0)]
        );
    }
}
