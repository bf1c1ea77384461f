//! Random belief samples: goal-biased means and Haar-rotated covariances with a
//! low-uncertainty bias.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::belief::GaussianBelief;
use crate::environment::{Environment, GoalRegion};
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::validity::is_valid;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerParams {
    /// Per-dimension eigenvalue caps.
    pub lambda_max: Vec<f64>,
    /// Per-dimension eigenvalues used for biased samples.
    pub lambda_low: Vec<f64>,
    /// Probability of drawing the low-uncertainty spectrum.
    pub p_bias: f64,
    /// Probability of drawing the mean inside the goal region.
    pub p_goal: f64,
    pub seed: u64,
    /// Sampling box for state coordinates past the position block, e.g. velocities.
    pub extra_lower: Vec<f64>,
    pub extra_upper: Vec<f64>,
}

/// Fraction of `lambda_max` used for `lambda_low` when none is configured.
pub const DEFAULT_LOW_FRACTION: f64 = 0.05;

impl SamplerParams {
    pub fn new(lambda_max: Vec<f64>, p_bias: f64, p_goal: f64, seed: u64) -> Self {
        let lambda_low = lambda_max.iter().map(|l| l * DEFAULT_LOW_FRACTION).collect();
        Self {
            lambda_max,
            lambda_low,
            p_bias,
            p_goal,
            seed,
            extra_lower: vec![],
            extra_upper: vec![],
        }
    }

    pub fn validate(&self, state_dim: usize, position_dims: usize) -> Result<()> {
        if self.lambda_max.len() != state_dim || self.lambda_low.len() != state_dim {
            return Err(Error::DimensionMismatch(format!(
                "lambda_max/lambda_low need {state_dim} entries"
            )));
        }
        for (lo, hi) in self.lambda_low.iter().zip(&self.lambda_max) {
            if !(*lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Invalid(format!(
                    "need 0 < lambda_low <= lambda_max, got {lo} and {hi}"
                )));
            }
        }
        for p in [self.p_bias, self.p_goal] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("probability {p} outside [0, 1]")));
            }
        }
        let extra = state_dim.saturating_sub(position_dims);
        if self.extra_lower.len() != extra || self.extra_upper.len() != extra {
            return Err(Error::DimensionMismatch(format!(
                "{extra} non-position state bounds required"
            )));
        }
        if self.extra_lower.iter().zip(&self.extra_upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Invalid("non-position state bounds are empty".into()));
        }
        Ok(())
    }
}

/// Mean with the position block in the goal region with probability `p_goal`, otherwise
/// uniform in `bounds`; remaining coordinates uniform in the configured extra bounds.
pub fn sample_mean<R: Rng + ?Sized>(
    bounds: &Aabb,
    goal: &GoalRegion,
    params: &SamplerParams,
    rng: &mut R,
) -> DVector<f64> {
    let k = bounds.dim();
    let mut mean = Vec::with_capacity(k + params.extra_lower.len());
    if rng.random::<f64>() < params.p_goal {
        mean.extend(sample_goal(bounds, goal, rng));
    } else {
        for i in 0..k {
            mean.push(uniform(rng, bounds.lower[i], bounds.upper[i]));
        }
    }
    for (l, u) in params.extra_lower.iter().zip(&params.extra_upper) {
        mean.push(uniform(rng, *l, *u));
    }
    DVector::from_vec(mean)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn sample_goal<R: Rng + ?Sized>(bounds: &Aabb, goal: &GoalRegion, rng: &mut R) -> Vec<f64> {
    match goal {
        GoalRegion::Box(g) => (0..bounds.dim())
            .map(|i| {
                let lo = g.lower[i].max(bounds.lower[i]);
                let hi = g.upper[i].min(bounds.upper[i]);
                uniform(rng, lo, hi)
            })
            .collect(),
        GoalRegion::Disc { center, radius } => {
            let k = center.len();
            for _ in 0..1000 {
                // uniform direction, radius ∝ U^(1/k)
                let dir: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
                let p: Vec<f64> = (0..k).map(|i| center[i] + r * dir[i] / norm).collect();
                if bounds.contains(&p) {
                    return p;
                }
            }
            (0..k)
                .map(|i| center[i].clamp(bounds.lower[i], bounds.upper[i]))
                .collect()
        }
    }
}

/// Haar-uniform orthogonal matrix: QR of a standard-normal matrix with the signs of `R`'s
/// diagonal folded into `Q`.
pub fn sample_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = m.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].abs() < 1e-12) {
            continue;
        }
        let mut q = qr.q();
        for (j, mut col) in q.column_iter_mut().enumerate() {
            if r[(j, j)] < 0.0 {
                col.neg_mut();
            }
        }
        return q;
    }
}

/// A sampled covariance together with the eigenvalues it was built from.
#[derive(Debug, Clone)]
pub struct SampledCovariance {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub biased: bool,
}

pub fn sample_covariance_with_spectrum<R: Rng + ?Sized>(
    params: &SamplerParams,
    rng: &mut R,
) -> SampledCovariance {
    let n = params.lambda_max.len();
    let biased = rng.random::<f64>() < params.p_bias;
    let eigenvalues: Vec<f64> = if biased {
        params.lambda_low.clone()
    } else {
        // 1 − U lies in (0, 1]
        params
            .lambda_max
            .iter()
            .map(|l| l * (1.0 - rng.random::<f64>()))
            .collect()
    };
    let o = sample_orthogonal(n, rng);
    let mut scaled = o.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= eigenvalues[j];
    }
    let m = scaled * o.transpose();
    SampledCovariance { matrix: (&m + m.transpose()) * 0.5, eigenvalues, biased }
}

/// `O diag(λ) Oᵀ` with `λ` drawn per [`SamplerParams`].
pub fn sample_covariance<R: Rng + ?Sized>(params: &SamplerParams, rng: &mut R) -> DMatrix<f64> {
    sample_covariance_with_spectrum(params, rng).matrix
}

/// Owns the RNG of one planner instance.
#[derive(Debug, Clone)]
pub struct BeliefSampler {
    params: SamplerParams,
    rng: ChaCha8Rng,
}

impl BeliefSampler {
    pub fn new(params: SamplerParams) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Self { params, rng }
    }

    pub fn params(&self) -> &SamplerParams {
        &self.params
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A belief sample whose whole covariance sits in `sigma`.
    pub fn sample(&mut self, env: &Environment) -> GaussianBelief {
        let mean = sample_mean(&env.bounds, &env.goal, &self.params, &mut self.rng);
        let cov = sample_covariance(&self.params, &mut self.rng);
        let n = mean.len();
        GaussianBelief::from_parts_unchecked(mean, cov, DMatrix::zeros(n, n))
    }
}

/// Side of the workspace grid used by [`compute_lambda_max`].
pub const LAMBDA_GRID: usize = 50;
/// Variance of the off-axis dimensions in [`compute_lambda_max`].
pub const LAMBDA_EPSILON: f64 = 1e-6;
/// Default upper limit of the doubling search.
pub const DEFAULT_LAMBDA_CAP: f64 = 1e6;

/// Per-dimension eigenvalue caps: the smallest variance along dimension `i` (with
/// [`LAMBDA_EPSILON`] elsewhere) that violates the chance constraint at every point of a
/// `50 × 50` grid over the workspace, found to 1% relative tolerance.
pub fn compute_lambda_max(env: &Environment, delta: f64, state_dim: usize, cap: f64) -> Result<Vec<f64>> {
    (0..state_dim)
        .map(|dim| lambda_max_along(env, delta, state_dim, dim, cap))
        .collect()
}

/// [`compute_lambda_max`] for a single dimension.
pub fn lambda_max_along(
    env: &Environment,
    delta: f64,
    state_dim: usize,
    dim: usize,
    cap: f64,
) -> Result<f64> {
    if state_dim < env.position_dims() || dim >= state_dim {
        return Err(Error::DimensionMismatch(format!(
            "dimension {dim} of a {state_dim}-state system in a {}-D workspace",
            env.position_dims()
        )));
    }
    let mut env = env.clone();
    env.delta = delta;
    let grid = grid_points(&env.bounds, state_dim);
    let zeros = DMatrix::zeros(state_dim, state_dim);
    let violates_everywhere = |lambda: f64| -> bool {
        let mut cov = DMatrix::from_diagonal_element(state_dim, state_dim, LAMBDA_EPSILON);
        cov[(dim, dim)] = lambda;
        grid.iter().all(|p| {
            let b = GaussianBelief::from_parts_unchecked(p.clone(), cov.clone(), zeros.clone());
            !is_valid(&b, &env)
        })
    };
    let mut hi = 1e-3;
    while !violates_everywhere(hi) {
        hi *= 2.0;
        if hi > cap {
            return Err(Error::Unbounded { dimension: dim, cap });
        }
    }
    let mut lo = hi / 2.0;
    if violates_everywhere(lo) {
        return Ok(lo);
    }
    while (hi - lo) / hi > 0.01 {
        let mid = 0.5 * (lo + hi);
        if violates_everywhere(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn grid_points(bounds: &Aabb, state_dim: usize) -> Vec<DVector<f64>> {
    let k = bounds.dim();
    let center = bounds.center();
    let cell = |i: usize, j: usize| {
        bounds.lower[i] + (j as f64 + 0.5) * (bounds.upper[i] - bounds.lower[i]) / LAMBDA_GRID as f64
    };
    let mut pts = Vec::with_capacity(LAMBDA_GRID * LAMBDA_GRID);
    for gx in 0..LAMBDA_GRID {
        for gy in 0..LAMBDA_GRID {
            let mut p = DVector::zeros(state_dim);
            p[0] = cell(0, gx);
            p[1] = cell(1, gy);
            for i in 2..k.min(state_dim) {
                p[i] = center[i];
            }
            pts.push(p);
        }
    }
    pts
}
