//! Gaussian beliefs split into estimation-error and estimate-dispersion covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::validated_psd;

/// A Gaussian belief `N(mean, sigma + lambda)`.
///
/// `sigma` is the covariance of the online estimation error and `lambda` the covariance of
/// the estimates themselves around the nominal state. They evolve under different recursions
/// and are kept apart; [`GaussianBelief::total_covariance`] gives the distribution used for
/// distances and probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    sigma: DMatrix<f64>,
    lambda: DMatrix<f64>,
    total: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, sigma: DMatrix<f64>, lambda: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if sigma.shape() != (n, n) || lambda.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {n}, sigma is {}x{}, lambda is {}x{}",
                sigma.nrows(),
                sigma.ncols(),
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        let sigma = validated_psd(&sigma)?;
        let lambda = validated_psd(&lambda)?;
        let total = &sigma + &lambda;
        Ok(Self { mean, sigma, lambda, total })
    }

    /// Belief with the whole covariance in `sigma` and `lambda = 0`.
    pub fn from_covariance(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, covariance, DMatrix::zeros(n, n))
    }

    /// Trusted constructor for covariances that are already symmetric PSD up to rounding.
    pub(crate) fn from_parts_unchecked(
        mean: DVector<f64>,
        sigma: DMatrix<f64>,
        lambda: DMatrix<f64>,
    ) -> Self {
        let total = &sigma + &lambda;
        Self { mean, sigma, lambda, total }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn total_covariance(&self) -> &DMatrix<f64> {
        &self.total
    }

    /// Mean and total covariance restricted to the first `k` coordinates.
    pub fn position_marginal(&self, k: usize) -> (DVector<f64>, DMatrix<f64>) {
        (
            self.mean.rows(0, k).into_owned(),
            self.total.view((0, 0), (k, k)).into_owned(),
        )
    }

    /// Maximum absolute elementwise difference over mean, sigma and lambda.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.mean - &other.mean)
            .amax()
            .max((&self.sigma - &other.sigma).amax())
            .max((&self.lambda - &other.lambda).amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_asymmetry, min_eigenvalue};
    use proptest::prelude::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn identity_belief() {
        let b = GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2), DMatrix::zeros(2, 2))
            .unwrap();
        assert_eq!(b.total_covariance(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn negative_variance_is_rejected() {
        let r = GaussianBelief::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn total_covariance_is_the_sum() {
        let b = GaussianBelief::new(
            DVector::zeros(2),
            m2(1.0, 0.5, 0.5, 1.0),
            m2(0.1, 0.0, 0.0, 0.1),
        )
        .unwrap();
        assert!((b.total_covariance() - m2(1.1, 0.5, 0.5, 1.1)).amax() < 1e-15);

        let b = GaussianBelief::new(DVector::zeros(2), m2(0.5, 0.0, 0.0, 0.5), m2(0.5, 0.0, 0.0, 0.5))
            .unwrap();
        assert_eq!(b.total_covariance(), &DMatrix::<f64>::identity(2, 2));

        let b = GaussianBelief::new(DVector::zeros(2), m2(1.0, 0.0, 0.0, 2.0), m2(3.0, 0.0, 0.0, 4.0))
            .unwrap();
        assert_eq!(b.total_covariance(), &m2(4.0, 0.0, 0.0, 6.0));
    }

    #[test]
    fn dimension_mismatch() {
        let r = GaussianBelief::new(DVector::zeros(3), DMatrix::identity(2, 2), DMatrix::zeros(2, 2));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn construction_symmetrizes_and_stays_psd(
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            skew in -0.5f64..0.5,
        ) {
            let g = DMatrix::from_row_slice(3, 3, &vals);
            let mut s = &g * g.transpose();
            s[(0, 1)] += skew;
            s[(1, 0)] -= skew;
            let b = GaussianBelief::new(DVector::zeros(3), s.clone(), s).unwrap();
            prop_assert_eq!(max_abs_asymmetry(b.sigma()), 0.0);
            prop_assert_eq!(max_abs_asymmetry(b.lambda()), 0.0);
            prop_assert!(min_eigenvalue(b.total_covariance()) >= -1e-9);
        }
    }
}
