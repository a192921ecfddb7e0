//! Small dense linear-algebra helpers shared by the models.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, ScaError};

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `(A + Aᵀ) / 2`
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(sym(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Sign convention: largest-magnitude entry positive, so results are reproducible.
        let (imax, _) = col.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
            if v.abs() > acc.1 { (i, v.abs()) } else { acc }
        });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// `A^{-1/2}` for symmetric positive (semi-)definite `A`, eigenvalues floored at `floor`.
pub fn inv_sqrt_spd(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(a));
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&d) * v.transpose()
}

/// Orthonormal basis for the column span of a tall matrix (thin QR).
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.ncols();
    let q = a.clone().qr().q();
    q.columns(0, p).into_owned()
}

/// `‖AᵀA − I‖_F`
pub fn orthonormality_residual(a: &DMatrix<f64>) -> f64 {
    let g = a.tr_mul(a);
    (g - DMatrix::identity(a.ncols(), a.ncols())).norm()
}

/// Largest principal angle (radians) between the column spans of two matrices
/// with orthonormal columns. Computed from sines so tiny angles stay accurate.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = b - a * a.tr_mul(b);
    let s = residual.svd(false, false).singular_values;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    smax.min(1.0).asin()
}

/// Row-wise (variables × samples) sample covariance with divisor `m − 1`.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.ncols();
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let denom = (m.max(2) - 1) as f64;
    sym(&(&centered * centered.transpose())) / denom
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| ScaError::Numerical("matrix is not positive definite".into()))?;
    Ok(sym(&chol.inverse()))
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
