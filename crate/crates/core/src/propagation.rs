//! Nominal dynamics and planning-time Kalman covariance propagation.

use nalgebra::{DMatrix, DVector};

use crate::belief::GaussianBelief;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, symmetrize};
use crate::system::LinearSystem;

/// `A x + B u`, rejecting controls outside the box bounds.
pub fn nominal_step(x: &DVector<f64>, u: &DVector<f64>, sys: &LinearSystem) -> Result<DVector<f64>> {
    if !sys.control_in_bounds(u) {
        return Err(Error::ControlOutOfBounds { control: u.iter().copied().collect() });
    }
    if x.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for a {}-state system",
            x.len(),
            sys.state_dim()
        )));
    }
    Ok(&sys.a * x + &sys.b * u)
}

/// One step of the closed-loop covariance recursion; the returned belief is centred on
/// `next_nominal`.
///
/// The prediction `Σ⁻ = AΣAᵀ + Q` is always applied. When the environment grants a
/// measurement at the predicted belief, the Kalman gain moves `LCΣ⁻` from `Σ⁻` into the
/// estimate dispersion; otherwise `Σ⁺ = Σ⁻` and `Λ` only contracts under `A − BK`.
pub fn belief_step(
    b: &GaussianBelief,
    next_nominal: &DVector<f64>,
    sys: &LinearSystem,
    env: &Environment,
) -> Result<GaussianBelief> {
    if b.dim() != sys.state_dim() || next_nominal.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch("belief and system dimensions differ".into()));
    }
    let sigma_minus = symmetrize(&(&sys.a * b.sigma() * sys.a.transpose() + &sys.q));
    let f = sys.closed_loop();
    let lambda_prop = f * b.lambda() * f.transpose();
    let prior = GaussianBelief::from_parts_unchecked(
        next_nominal.clone(),
        sigma_minus.clone(),
        lambda_prop.clone(),
    );
    let Some(r) = env.measurement_for_belief(&prior) else {
        return Ok(GaussianBelief::from_parts_unchecked(
            next_nominal.clone(),
            sigma_minus,
            symmetrize(&lambda_prop),
        ));
    };
    if r.nrows() != sys.measurement_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement noise is {}x{} but C has {} rows",
            r.nrows(),
            r.ncols(),
            sys.measurement_dim()
        )));
    }
    let c_sigma = &sys.c * &sigma_minus;
    let innovation = &c_sigma * sys.c.transpose() + r;
    // L C Σ⁻ = (CΣ⁻)ᵀ S⁻¹ (CΣ⁻)
    let solved = spd_solve(&innovation, &c_sigma)?;
    let reduction = symmetrize(&(c_sigma.transpose() * solved));
    let sigma_plus = symmetrize(&(&sigma_minus - &reduction));
    let lambda_plus = symmetrize(&(lambda_prop + reduction));
    Ok(GaussianBelief::from_parts_unchecked(next_nominal.clone(), sigma_plus, lambda_plus))
}

/// Kalman gain `L = Σ⁻Cᵀ(CΣ⁻Cᵀ + R)⁻¹` for a predicted covariance.
pub fn kalman_gain(sigma_minus: &DMatrix<f64>, c: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c_sigma = c * sigma_minus;
    let innovation = &c_sigma * c.transpose() + r;
    Ok(spd_solve(&innovation, &c_sigma)?.transpose())
}

/// Beliefs and nominal states after each control of an edge (the start is excluded).
pub fn propagate_edge(
    b: &GaussianBelief,
    x_nominal: &DVector<f64>,
    controls: &[DVector<f64>],
    sys: &LinearSystem,
    env: &Environment,
) -> Result<(Vec<GaussianBelief>, Vec<DVector<f64>>)> {
    if controls.len() < sys.min_steps || controls.len() > sys.max_steps {
        return Err(Error::InvalidDuration {
            steps: controls.len(),
            min: sys.min_steps,
            max: sys.max_steps,
        });
    }
    chain(b, x_nominal, controls, sys, env)
}

/// Like [`propagate_edge`] without the duration bounds, for whole plans.
pub(crate) fn chain(
    b: &GaussianBelief,
    x_nominal: &DVector<f64>,
    controls: &[DVector<f64>],
    sys: &LinearSystem,
    env: &Environment,
) -> Result<(Vec<GaussianBelief>, Vec<DVector<f64>>)> {
    let mut beliefs = Vec::with_capacity(controls.len());
    let mut states = Vec::with_capacity(controls.len());
    let mut belief = b.clone();
    let mut x = x_nominal.clone();
    for u in controls {
        x = nominal_step(&x, u, sys)?;
        belief = belief_step(&belief, &x, sys, env)?;
        beliefs.push(belief.clone());
        states.push(x.clone());
    }
    Ok((beliefs, states))
}

/// Path length of the position coordinates of a state sequence. States shorter than
/// `position_dims` contribute the coordinates they have.
pub fn path_length(states: &[DVector<f64>], position_dims: usize) -> f64 {
    states
        .windows(2)
        .map(|w| {
            (0..position_dims.min(w[0].len()))
                .map(|i| (w[1][i] - w[0][i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Nominal controls and states with the planned beliefs along them.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlan {
    pub controls: Vec<DVector<f64>>,
    pub nominal_states: Vec<DVector<f64>>,
    pub beliefs: Vec<GaussianBelief>,
    /// Path length of the nominal positions.
    pub cost: f64,
}

impl MotionPlan {
    /// Forward-propagates `controls` from `start`, whose mean is the initial nominal state.
    pub fn from_controls(
        start: &GaussianBelief,
        controls: Vec<DVector<f64>>,
        sys: &LinearSystem,
        env: &Environment,
    ) -> Result<Self> {
        let (beliefs, states) = chain(start, start.mean(), &controls, sys, env)?;
        let mut nominal_states = Vec::with_capacity(states.len() + 1);
        nominal_states.push(start.mean().clone());
        nominal_states.extend(states);
        let mut all_beliefs = Vec::with_capacity(beliefs.len() + 1);
        all_beliefs.push(start.clone());
        all_beliefs.extend(beliefs);
        let cost = path_length(&nominal_states, env.position_dims());
        Ok(Self { controls, nominal_states, beliefs: all_beliefs, cost })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn start(&self) -> &GaussianBelief {
        &self.beliefs[0]
    }

    pub fn terminal(&self) -> &GaussianBelief {
        self.beliefs.last().expect("plans hold at least the start belief")
    }

    /// Steps (0-based, including the start) at which the chance constraint fails.
    pub fn invalid_steps(&self, env: &Environment) -> Vec<usize> {
        self.beliefs
            .iter()
            .enumerate()
            .filter(|(_, b)| !crate::validity::is_valid(b, env))
            .map(|(k, _)| k)
            .collect()
    }

    /// Every belief satisfies the collision constraint and the terminal one the goal.
    pub fn is_feasible(&self, env: &Environment) -> bool {
        self.invalid_steps(env).is_empty() && crate::validity::goal_satisfied(self.terminal(), env)
    }

    /// Whether any nominal segment touches a measurement region.
    pub fn visits_measurement_region(&self, env: &Environment) -> bool {
        let pos = |x: &DVector<f64>| [x[0], x[1]];
        env.measurement_regions.iter().any(|m| {
            self.nominal_states.iter().any(|x| m.region.contains(pos(x)))
                || self
                    .nominal_states
                    .windows(2)
                    .any(|w| m.region.intersects_segment(pos(&w[0]), pos(&w[1])))
        })
    }
}
