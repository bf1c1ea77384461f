//! Compares the 2-Wasserstein distance with the mean-only distance on a few beliefs.

use belief_trees::belief::GaussianBelief;
use belief_trees::metric::MetricKind;
use nalgebra::{DMatrix, DVector};

fn belief(x: f64, y: f64, var: f64) -> GaussianBelief {
    GaussianBelief::from_covariance(DVector::from_vec(vec![x, y]), DMatrix::identity(2, 2) * var).unwrap()
}

fn main() {
    let reference = belief(0.0, 0.0, 1.0);
    let others = [
        ("same mean, tighter", belief(0.0, 0.0, 0.1)),
        ("same mean, wider", belief(0.0, 0.0, 9.0)),
        ("shifted by 3", belief(3.0, 0.0, 1.0)),
        ("shifted, tighter", belief(3.0, 0.0, 0.1)),
    ];
    println!("{:<20} {:>10} {:>10}", "belief", "W2^2", "mean^2");
    for (name, b) in &others {
        println!(
            "{:<20} {:>10.4} {:>10.4}",
            name,
            MetricKind::Wasserstein2.distance(&reference, b),
            MetricKind::EuclideanMean.distance(&reference, b)
        );
    }
}
