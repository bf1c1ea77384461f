//! Chance-constraint checks of Gaussian beliefs against convex obstacles, workspace bounds
//! and the goal region. All probabilities use the position block of the total covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::belief::GaussianBelief;
use crate::environment::{Environment, GoalRegion, RiskAllocation};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ConvexPolygon};

/// Projected variances below this are treated as deterministic.
pub const MIN_PROJECTED_VARIANCE: f64 = 1e-15;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(a·pos > c)` for a unit normal `a` over the position block.
pub fn halfplane_violation_prob(b: &GaussianBelief, a: &[f64], c: f64) -> Result<f64> {
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("half-plane normal has norm {norm}")));
    }
    if a.len() > b.dim() {
        return Err(Error::DimensionMismatch("normal longer than the state".into()));
    }
    let (m, v) = project(b, a);
    if v < MIN_PROJECTED_VARIANCE {
        return Err(Error::DegenerateDirection { variance: v });
    }
    Ok(normal_cdf((m - c) / v.sqrt()))
}

fn project(b: &GaussianBelief, a: &[f64]) -> (f64, f64) {
    let mean = b.mean();
    let cov = b.total_covariance();
    let k = a.len().min(mean.len());
    let mut m = 0.0;
    let mut v = 0.0;
    for i in 0..k {
        m += a[i] * mean[i];
        for j in 0..k {
            v += a[i] * cov[(i, j)] * a[j];
        }
    }
    (m, v)
}

/// `P(a·pos > c)`, treating degenerate directions as a deterministic comparison.
fn exceed_prob(b: &GaussianBelief, a: &[f64], c: f64) -> f64 {
    let (m, v) = project(b, a);
    if v < MIN_PROJECTED_VARIANCE {
        return if m > c { 1.0 } else { 0.0 };
    }
    normal_cdf((m - c) / v.sqrt())
}

/// Upper bound on `P(pos ∈ poly)`: the polygon lies inside each of its supporting
/// half-planes, so the smallest half-plane probability bounds it.
pub fn obstacle_collision_bound(b: &GaussianBelief, poly: &ConvexPolygon) -> f64 {
    poly.faces()
        .iter()
        .map(|f| {
            let inward = [-f.normal[0], -f.normal[1]];
            exceed_prob(b, &inward, -f.offset)
        })
        .fold(1.0, f64::min)
}

/// Lower bound on `P(pos ∈ poly)` via the union bound over faces.
pub fn polygon_containment_lower_bound(b: &GaussianBelief, poly: &ConvexPolygon) -> f64 {
    let outside: f64 = poly
        .faces()
        .iter()
        .map(|f| exceed_prob(b, &f.normal, f.offset))
        .sum();
    (1.0 - outside).max(0.0)
}

/// Sum of the face tail probabilities of leaving the workspace box.
pub fn bounds_exit_bound(b: &GaussianBelief, bounds: &Aabb) -> f64 {
    axis_tails(b, bounds).iter().map(|(lo, hi)| lo + hi).sum()
}

fn axis_tails(b: &GaussianBelief, bx: &Aabb) -> Vec<(f64, f64)> {
    let cov = b.total_covariance();
    (0..bx.dim())
        .map(|i| {
            let m = b.mean()[i];
            let s = cov[(i, i)].max(0.0).sqrt();
            if s * s < MIN_PROJECTED_VARIANCE {
                ((m < bx.lower[i]) as u8 as f64, (m > bx.upper[i]) as u8 as f64)
            } else {
                (
                    normal_cdf((bx.lower[i] - m) / s),
                    normal_cdf((m - bx.upper[i]) / s),
                )
            }
        })
        .collect()
}

/// Per-item risks: one entry per obstacle followed by the workspace-exit bound.
pub fn step_risks(b: &GaussianBelief, env: &Environment) -> Vec<f64> {
    let mut r: Vec<f64> = env
        .obstacles
        .iter()
        .map(|o| obstacle_collision_bound(b, o))
        .collect();
    r.push(bounds_exit_bound(b, &env.bounds));
    r
}

/// Whether the belief satisfies the per-step collision chance constraint.
pub fn is_valid(b: &GaussianBelief, env: &Environment) -> bool {
    match env.risk_allocation {
        RiskAllocation::Union => {
            let mut total = bounds_exit_bound(b, &env.bounds);
            if total >= env.delta {
                return false;
            }
            for o in &env.obstacles {
                total += obstacle_collision_bound(b, o);
                if total >= env.delta {
                    return false;
                }
            }
            true
        }
        RiskAllocation::PerObstacle => {
            bounds_exit_bound(b, &env.bounds) < env.delta
                && env
                    .obstacles
                    .iter()
                    .all(|o| obstacle_collision_bound(b, o) < env.delta)
        }
    }
}

/// Conservative lower bound on `P(pos ∈ goal)`.
pub fn goal_probability_lower_bound(b: &GaussianBelief, goal: &GoalRegion) -> f64 {
    match goal {
        GoalRegion::Box(bx) => {
            let k = bx.dim();
            let cov = b.total_covariance();
            let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || cov[(i, j)].abs() <= 1e-9));
            let tails = axis_tails(b, bx);
            if diagonal {
                tails.iter().map(|(lo, hi)| (1.0 - lo - hi).max(0.0)).product()
            } else {
                (1.0 - tails.iter().map(|(lo, hi)| lo + hi).sum::<f64>()).max(0.0)
            }
        }
        GoalRegion::Disc { center, radius } => {
            let k = center.len();
            let (mean, cov) = b.position_marginal(k);
            let offset = (&mean - center).norm();
            let slack = radius - offset;
            if slack <= 0.0 {
                return 0.0;
            }
            let lmax = largest_eigenvalue(&cov);
            if lmax < MIN_PROJECTED_VARIANCE {
                return 1.0;
            }
            // ‖x − μ‖² ≤ λ_max χ²_k, so P(‖x − μ‖ ≤ slack) ≥ F_k(slack² / λ_max)
            let chi = ChiSquared::new(k as f64).expect("positive degrees of freedom");
            chi.cdf(slack * slack / lmax)
        }
    }
}

fn largest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Whether the terminal belief reaches the goal with probability above `1 − delta`.
pub fn goal_satisfied(b: &GaussianBelief, env: &Environment) -> bool {
    goal_probability_lower_bound(b, &env.goal) > 1.0 - env.delta
}

/// Position of a state vector as a slice of its first `k` coordinates.
pub fn position(x: &DVector<f64>, k: usize) -> &[f64] {
    &x.as_slice()[..k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::MeasurementRegion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iso(mean: [f64; 2], var: f64) -> GaussianBelief {
        GaussianBelief::from_covariance(
            DVector::from_row_slice(&mean),
            DMatrix::identity(2, 2) * var,
        )
        .unwrap()
    }

    fn open_env(obstacles: Vec<ConvexPolygon>, delta: f64) -> Environment {
        Environment::new(
            Aabb::new(vec![0.0, 0.0], vec![100.0, 100.0]).unwrap(),
            obstacles,
            GoalRegion::Box(Aabb::new(vec![90.0, 90.0], vec![100.0, 100.0]).unwrap()),
            vec![],
            delta,
        )
        .unwrap()
    }

    #[test]
    fn mean_on_boundary_is_one_half() {
        let b = GaussianBelief::from_covariance(
            DVector::from_row_slice(&[1.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 0.7]),
        )
        .unwrap();
        let a = [0.6, 0.8];
        let c = 0.6 * 1.0 + 0.8 * 2.0;
        assert!((halfplane_violation_prob(&b, &a, c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_sigma_tail() {
        let b = iso([0.0, 0.0], 0.25);
        // plane x = 1 lies at +2σ from the mean
        let p = halfplane_violation_prob(&b, &[1.0, 0.0], 1.0).unwrap();
        assert!((p - 0.022750131948179).abs() < 1e-6);
        let deep = halfplane_violation_prob(&b, &[1.0, 0.0], 5.0).unwrap();
        assert!(deep < 1e-20 && deep > 0.0);
    }

    #[test]
    fn degenerate_direction_and_bad_normal() {
        let b = iso([0.0, 0.0], 0.0);
        assert!(matches!(
            halfplane_violation_prob(&b, &[1.0, 0.0], 1.0),
            Err(Error::DegenerateDirection { .. })
        ));
        let b = iso([0.0, 0.0], 1.0);
        assert!(halfplane_violation_prob(&b, &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn far_obstacle_and_centroid() {
        let sq = ConvexPolygon::rectangle(10.0, 10.0, 12.0, 12.0).unwrap();
        assert!(obstacle_collision_bound(&iso([0.0, 0.0], 0.5), &sq) < 1e-6);
        assert!(obstacle_collision_bound(&iso([11.0, 11.0], 3.0), &sq) >= 0.5);
    }

    #[test]
    fn unit_square_left_of_edge_is_conservative() {
        let sq = ConvexPolygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = iso([-1.0, 0.5], 0.25);
        let bound = obstacle_collision_bound(&b, &sq);
        assert!((bound - 0.022750131948179).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                sq.contains([-1.0 + 0.5 * x, 0.5 + 0.5 * y])
            })
            .count();
        let rate = hits as f64 / n as f64;
        assert!(rate <= bound, "monte carlo {rate} above bound {bound}");
    }

    #[test]
    fn validity_examples() {
        let sq = ConvexPolygon::rectangle(40.0, 40.0, 60.0, 60.0).unwrap();
        let env = open_env(vec![sq], 0.05);
        assert!(is_valid(&iso([20.0, 20.0], 1e-9), &env));
        assert!(!is_valid(&iso([50.0, 50.0], 1e-9), &env));
        for delta in [0.5, 0.2, 0.01] {
            let mut e = env.clone();
            e.delta = delta;
            assert!(!is_valid(&iso([45.0, 50.0], 4.0), &e));
        }
    }

    #[test]
    fn empty_obstacle_list_checks_only_bounds() {
        let env = open_env(vec![], 0.05);
        assert!(is_valid(&iso([50.0, 50.0], 1.0), &env));
        assert!(!is_valid(&iso([0.5, 50.0], 1.0), &env));
        assert_eq!(step_risks(&iso([50.0, 50.0], 1.0), &env).len(), 1);
    }

    #[test]
    fn union_allocation_is_stricter_than_per_obstacle() {
        // passage of half-width 2 between two walls; each wall alone sits at ~Φ(-1.8)
        let left = ConvexPolygon::rectangle(40.0, 0.0, 48.0, 100.0).unwrap();
        let right = ConvexPolygon::rectangle(52.0, 0.0, 60.0, 100.0).unwrap();
        let env = open_env(vec![left, right], 0.05);
        let b = iso([50.0, 50.0], (2.0f64 / 1.8).powi(2));
        assert!(!is_valid(&b, &env));
        let per = env.clone().with_risk_allocation(RiskAllocation::PerObstacle);
        assert!(is_valid(&b, &per));
    }

    #[test]
    fn goal_examples() {
        let env = open_env(vec![], 0.05);
        assert!(goal_satisfied(&iso([95.0, 95.0], 1e-9), &env));
        assert!(!goal_satisfied(&iso([50.0, 95.0], 1e-4), &env));
    }

    #[test]
    fn one_dimensional_goal_interval() {
        // x-axis interval [9, 11], y-axis effectively unconstrained
        let goal = GoalRegion::Box(Aabb::new(vec![9.0, -1e6], vec![11.0, 1e6]).unwrap());
        let b = GaussianBelief::from_covariance(
            DVector::from_row_slice(&[10.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.16, 1e-6])),
        )
        .unwrap();
        let p = goal_probability_lower_bound(&b, &goal);
        let oracle = normal_cdf(2.5) - normal_cdf(-2.5);
        assert!((p - oracle).abs() < 1e-12);
        assert!(p > 0.95);
    }

    #[test]
    fn correlated_goal_uses_bonferroni() {
        let goal = GoalRegion::Box(Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap());
        let b = GaussianBelief::from_covariance(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[0.25, 0.1, 0.1, 0.25]),
        )
        .unwrap();
        let tail = 2.0 * normal_cdf(-2.0);
        assert!((goal_probability_lower_bound(&b, &goal) - (1.0 - 2.0 * tail)).abs() < 1e-12);
    }

    #[test]
    fn disc_goal_bound() {
        let goal = GoalRegion::Disc { center: DVector::from_vec(vec![0.0, 0.0]), radius: 3.0 };
        let b = iso([0.0, 0.0], 1.0);
        // isotropic: ‖x‖² ~ χ²₂ exactly, P = 1 − exp(−9/2)
        let p = goal_probability_lower_bound(&b, &goal);
        assert!((p - (1.0 - (-4.5f64).exp())).abs() < 1e-9);
        assert_eq!(goal_probability_lower_bound(&iso([5.0, 0.0], 1.0), &goal), 0.0);
    }

    #[test]
    fn probabilistic_membership_needs_margin() {
        use crate::environment::MeasurementMembership;
        let region = ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap();
        let mut env = open_env(vec![], 0.05);
        env.measurement_regions.push(MeasurementRegion {
            region,
            noise: DMatrix::identity(2, 2) * 0.01,
        });
        let edge = iso([9.9, 5.0], 1.0);
        assert!(env.measurement_for_belief(&edge).is_some());
        let env = env.with_membership(MeasurementMembership::Probabilistic { level: 0.95 });
        assert!(env.measurement_for_belief(&edge).is_none());
        assert!(env.measurement_for_belief(&iso([5.0, 5.0], 1.0)).is_some());
    }
}
