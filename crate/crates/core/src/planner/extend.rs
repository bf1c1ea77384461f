use nalgebra::DVector;
use rand::Rng;

use crate::belief::GaussianBelief;
use crate::environment::Environment;
use crate::metric::MetricKind;
use crate::propagation::{belief_step, nominal_step};
use crate::system::LinearSystem;
use crate::validity::is_valid;

use super::tree::{EdgeControls, Tree};

/// A propagated edge whose every intermediate belief passed the validity check.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub belief: GaussianBelief,
    pub edge: EdgeControls,
    pub edge_cost: f64,
}

pub fn random_control<R: Rng + ?Sized>(sys: &LinearSystem, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(sys.control_dim(), |i, _| {
        sys.u_min[i] + (sys.u_max[i] - sys.u_min[i]) * rng.random::<f64>()
    })
}

/// Propagates `edge` from `start`, returning `None` as soon as a belief fails the chance
/// constraint or the propagation errors.
pub fn propagate_candidate(
    start: &GaussianBelief,
    edge: EdgeControls,
    sys: &LinearSystem,
    env: &Environment,
) -> Option<Candidate> {
    let k = env.position_dims();
    let mut belief = start.clone();
    let mut cost = 0.0;
    for _ in 0..edge.steps {
        let x = nominal_step(belief.mean(), &edge.control, sys).ok()?;
        cost += (0..k)
            .map(|i| (x[i] - belief.mean()[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        belief = belief_step(&belief, &x, sys, env).ok()?;
        if !is_valid(&belief, env) {
            return None;
        }
    }
    Some(Candidate { belief, edge, edge_cost: cost })
}

/// The candidate whose endpoint is closest to `sample`; earlier candidates win ties.
pub fn choose_closest(candidates: Vec<Candidate>, sample: &GaussianBelief, metric: MetricKind) -> Option<Candidate> {
    let mut best: Option<(f64, Candidate)> = None;
    for c in candidates {
        let d = metric.distance(&c.belief, sample);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Draws `candidates` random (control, duration) pairs from node `id`, keeps the valid
/// ones and returns the one ending closest to `sample`.
#[allow(clippy::too_many_arguments)]
pub fn extend<R: Rng + ?Sized>(
    tree: &Tree,
    id: usize,
    sample: &GaussianBelief,
    sys: &LinearSystem,
    env: &Environment,
    metric: MetricKind,
    candidates: usize,
    rng: &mut R,
) -> Option<Candidate> {
    let start = tree.belief(id);
    let survivors: Vec<Candidate> = (0..candidates)
        .filter_map(|_| {
            let control = random_control(sys, rng);
            let steps = rng.random_range(sys.min_steps..=sys.max_steps);
            propagate_candidate(start, EdgeControls { control, steps }, sys, env)
        })
        .collect();
    choose_closest(survivors, sample, metric)
}
