//! Linear time-invariant systems with a fixed stabilizing feedback gain.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::validated_psd;

/// `x' = A x + B u + w`, `z = C x + v`, `w ~ N(0, Q)`, tracked with `u = ǔ − K(x̂ − x̌)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    /// Inclusive bounds on edge duration in steps.
    pub min_steps: usize,
    pub max_steps: usize,
    closed_loop: DMatrix<f64>,
}

impl LinearSystem {
    /// Builds and validates a system. When `k` is `None` the gain is the infinite-horizon LQR
    /// gain with identity weights.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        k: Option<DMatrix<f64>>,
        u_min: DVector<f64>,
        u_max: DVector<f64>,
        min_steps: usize,
        max_steps: usize,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let dims = |what: &str| Error::DimensionMismatch(what.to_string());
        if !a.is_square() || n == 0 {
            return Err(dims("A must be square and non-empty"));
        }
        if b.nrows() != n {
            return Err(dims("B must have as many rows as A"));
        }
        if c.ncols() != n {
            return Err(dims("C must have as many columns as A has rows"));
        }
        if q.shape() != (n, n) {
            return Err(dims("Q must be n x n"));
        }
        if u_min.len() != m || u_max.len() != m {
            return Err(dims("control bounds must have length m"));
        }
        if u_min.iter().zip(u_max.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::Invalid("control lower bound exceeds upper bound".into()));
        }
        if min_steps == 0 || min_steps > max_steps {
            return Err(Error::Invalid(format!(
                "edge duration bounds [{min_steps}, {max_steps}] must satisfy 1 <= min <= max"
            )));
        }
        let q = validated_psd(&q)?;
        let k = match k {
            Some(k) => k,
            None => lqr_gain(&a, &b, &DMatrix::identity(n, n), &DMatrix::identity(m, m))?,
        };
        if k.shape() != (m, n) {
            return Err(dims("K must be m x n"));
        }
        let closed_loop = &a - &b * &k;
        let rho = spectral_radius(&closed_loop);
        if !(rho < 1.0) {
            return Err(Error::Invalid(format!(
                "feedback gain is not stabilizing: spectral radius of A - BK is {rho}"
            )));
        }
        Ok(Self { a, b, c, q, k, u_min, u_max, min_steps, max_steps, closed_loop })
    }

    /// Holonomic point robot: `A = B = C = I`, isotropic process noise.
    pub fn single_integrator_2d(q: f64, u_max: f64, min_steps: usize, max_steps: usize) -> Result<Self> {
        let i = DMatrix::identity(2, 2);
        Self::new(
            i.clone(),
            i.clone(),
            i.clone(),
            i * q,
            None,
            DVector::from_element(2, -u_max),
            DVector::from_element(2, u_max),
            min_steps,
            max_steps,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn measurement_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `A − BK`.
    pub fn closed_loop(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }

    pub fn control_in_bounds(&self, u: &DVector<f64>) -> bool {
        const SLACK: f64 = 1e-12;
        u.len() == self.control_dim()
            && u.iter()
                .enumerate()
                .all(|(i, v)| *v >= self.u_min[i] - SLACK && *v <= self.u_max[i] + SLACK)
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub const LQR_TOLERANCE: f64 = 1e-10;
pub const LQR_MAX_ITERATIONS: usize = 100_000;

/// Discrete-time infinite-horizon LQR gain by fixed-point iteration of the Riccati equation.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    state_cost: &DMatrix<f64>,
    control_cost: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let at = a.transpose();
    let bt = b.transpose();
    let gain = |p: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let lhs = control_cost + &bt * p * b;
        let rhs = &bt * p * a;
        lhs.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::Invalid("control cost R + BᵀPB is not positive definite".into()))
    };
    let mut p = state_cost.clone();
    for _ in 0..LQR_MAX_ITERATIONS {
        let k = gain(&p)?;
        let next = state_cost + &at * &p * a - &at * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &p).amax();
        let scale = next.amax().max(1.0);
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if change <= LQR_TOLERANCE * scale {
            let k = gain(&p)?;
            if spectral_radius(&(a - b * &k)) < 1.0 {
                return Ok(k);
            }
            break;
        }
    }
    Err(Error::NoConvergence { iterations: LQR_MAX_ITERATIONS })
}
