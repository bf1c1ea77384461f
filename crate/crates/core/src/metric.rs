//! Distances between Gaussian beliefs.
//!
//! The Wasserstein distance is used in its squared form, `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ −
//! 2(Σ₁^½ Σ₂ Σ₁^½)^½)`, evaluated on total covariances. Nearest-neighbour orderings are the
//! same as for the root, which is only taken where the metric axioms are checked.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::belief::GaussianBelief;
use crate::error::{Error, Result};
use crate::linalg::{sqrt_psd, trace_sqrt_psd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Squared 2-Wasserstein distance between the Gaussians.
    Wasserstein2,
    /// Euclidean distance between the means; covariance-blind.
    EuclideanMean,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Wasserstein2 => "W2",
            MetricKind::EuclideanMean => "l2",
        }
    }

    /// Distance between two beliefs of equal dimension. Panics on mismatched dimensions;
    /// use [`wasserstein2`] / [`euclidean_mean`] for checked calls.
    pub fn distance(self, a: &GaussianBelief, b: &GaussianBelief) -> f64 {
        match self {
            MetricKind::Wasserstein2 => w2_unchecked(a, b),
            MetricKind::EuclideanMean => (a.mean() - b.mean()).norm(),
        }
    }

    /// A lower bound on [`MetricKind::distance`] given only the Euclidean distance between
    /// the means (or a lower bound on it).
    pub fn lower_bound_from_mean_distance(self, d: f64) -> f64 {
        match self {
            MetricKind::Wasserstein2 => d * d,
            MetricKind::EuclideanMean => d,
        }
    }
}

fn check_dims(a: &GaussianBelief, b: &GaussianBelief) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "beliefs of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Squared 2-Wasserstein distance between two Gaussian beliefs.
pub fn wasserstein2(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    check_dims(a, b)?;
    Ok(w2_unchecked(a, b))
}

/// Euclidean distance between the belief means.
pub fn euclidean_mean(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    check_dims(a, b)?;
    Ok((a.mean() - b.mean()).norm())
}

fn w2_unchecked(a: &GaussianBelief, b: &GaussianBelief) -> f64 {
    let mean_term = (a.mean() - b.mean()).norm_squared();
    let s1 = a.total_covariance();
    let s2 = b.total_covariance();
    let cross = trace_sqrt_cross(s1, s2);
    (mean_term + s1.trace() + s2.trace() - 2.0 * cross).max(0.0)
}

/// `Tr((S₁^½ S₂ S₁^½)^½)`, i.e. the sum of square roots of the eigenvalues of `S₁ S₂`.
pub fn trace_sqrt_cross(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> f64 {
    match s1.nrows() {
        0 => 0.0,
        1 => (s1[(0, 0)] * s2[(0, 0)]).max(0.0).sqrt(),
        2 => {
            // eigenvalues μ₁, μ₂ of S₁S₂: sum = Tr(S₁S₂), product = det S₁ det S₂
            let tr = s1[(0, 0)] * s2[(0, 0)]
                + s1[(0, 1)] * s2[(1, 0)]
                + s1[(1, 0)] * s2[(0, 1)]
                + s1[(1, 1)] * s2[(1, 1)];
            let det1 = s1[(0, 0)] * s1[(1, 1)] - s1[(0, 1)] * s1[(1, 0)];
            let det2 = s2[(0, 0)] * s2[(1, 1)] - s2[(0, 1)] * s2[(1, 0)];
            (tr + 2.0 * (det1 * det2).max(0.0).sqrt()).max(0.0).sqrt()
        }
        _ => {
            let r = sqrt_psd(s1).unwrap_or_else(|_| s1.map(|v| v.max(0.0)));
            trace_sqrt_psd(&(&r * s2 * &r))
        }
    }
}

/// General-path cross trace via explicit square roots, used to cross-check the closed forms.
pub fn trace_sqrt_cross_eigen(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let r = sqrt_psd(s1)?;
    Ok(trace_sqrt_psd(&(&r * s2 * &r)))
}
