//! Dense symmetric-matrix helpers shared by every other module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance on eigenvalues below which a symmetric matrix is rejected as not PSD.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Innovation matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Symmetrizes `m`, checks it is PSD within [`PSD_TOLERANCE`] and clamps small negative
/// eigenvalues to zero.
pub fn validated_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let sym = symmetrize(m);
    if sym.nrows() == 0 {
        return Ok(sym);
    }
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(symmetrize(&recompose(&eig.eigenvectors, &clamped)))
}

fn recompose(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    scaled * vectors.transpose()
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues inside the
/// tolerance are clamped to zero.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(symmetrize(&recompose(&eig.eigenvectors, &roots)))
}

/// Trace of the PSD square root, `Tr(M^{1/2})`, without forming the root.
pub fn trace_sqrt_psd(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].max(0.0).sqrt(),
        _ => SymmetricEigen::new(symmetrize(m))
            .eigenvalues
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .sum(),
    }
}

/// Solves `S X = B` for symmetric positive definite `S`, rejecting ill-conditioned `S`.
pub fn spd_solve(s: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(s);
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    match sym.cholesky() {
        Some(chol) => Ok(chol.solve(b)),
        None => Err(Error::SingularInnovation { condition }),
    }
}

/// `M v v^T`-free quadratic form `a^T M a`.
pub fn quad_form(m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    (a.transpose() * m * a)[(0, 0)]
}

pub fn max_abs_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Frobenius norm of `a - b` divided by the Frobenius norm of `b`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
