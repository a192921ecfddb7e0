//! Geometry of the product manifold `St(N, p) × E(N, p)`.
//!
//! The Stiefel factor carries the embedded (Frobenius) metric, so the tangent
//! space at `W̃` is `{H : W̃ᵀH + HᵀW̃ = 0}` and the orthogonal projection onto it
//! is `Z − W̃ sym(W̃ᵀZ)`. Points move along the polar retraction
//! `(W̃ + tH)(I + t²HᵀH)^{-1/2}`; tangent vectors are carried between points by
//! re-projection.

use nalgebra::DMatrix;

use crate::error::{shape_mismatch, Result, ScaError};
use crate::linalg::{frob_inner, inv_sqrt_spd, orthonormality_residual, sym};

/// Tolerance for accepting a matrix as a Stiefel point.
pub const STIEFEL_TOL: f64 = 1e-8;
/// Relative tangency residual above which `retract` rejects a direction.
pub const TANGENT_TOL: f64 = 1e-6;
/// Eigenvalue floor for the inverse square root in the retraction.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// An `N × p` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint(DMatrix<f64>);

impl StiefelPoint {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 || matrix.ncols() > matrix.nrows() {
            return Err(ScaError::InvalidArgument(format!(
                "Stiefel point must be N x p with 1 <= p <= N, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let r = orthonormality_residual(&matrix);
        if !(r <= STIEFEL_TOL) {
            return Err(ScaError::InvalidArgument(format!(
                "columns are not orthonormal (residual {r:.3e})"
            )));
        }
        Ok(Self(matrix))
    }

    /// Orthonormal factor of an arbitrary full-column-rank matrix.
    pub fn from_qr(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(crate::linalg::orthonormalize(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    /// `‖W̃ᵀH + HᵀW̃‖_F`
    pub fn tangency_residual(&self, h: &DMatrix<f64>) -> f64 {
        let a = self.0.tr_mul(h);
        (&a + a.transpose()).norm()
    }
}

/// `(W, W̃)`: free encoder weights and orthonormal decoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub w: DMatrix<f64>,
    pub w_tilde: StiefelPoint,
}

impl ProductPoint {
    pub fn new(w: DMatrix<f64>, w_tilde: StiefelPoint) -> Result<Self> {
        if w.shape() != w_tilde.shape() {
            return Err(shape_mismatch("product point", w_tilde.shape(), w.shape()));
        }
        Ok(Self { w, w_tilde })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.w.shape()
    }
}

/// Tangent vector on the product manifold: `dw` for the Euclidean factor,
/// `dh` for the Stiefel factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub dw: DMatrix<f64>,
    pub dh: DMatrix<f64>,
}

impl TangentPair {
    pub fn new(dw: DMatrix<f64>, dh: DMatrix<f64>) -> Result<Self> {
        if dw.shape() != dh.shape() {
            return Err(shape_mismatch("tangent pair", dw.shape(), dh.shape()));
        }
        Ok(Self { dw, dh })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            dw: DMatrix::zeros(rows, cols),
            dh: DMatrix::zeros(rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.dw.shape()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dw: &self.dw * s,
            dh: &self.dh * s,
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            dw: &self.dw + &other.dw * s,
            dh: &self.dh + &other.dh * s,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.dw.norm_squared() + self.dh.norm_squared()).sqrt()
    }
}

/// Orthogonal projection of `z` onto the tangent space at `base`.
pub fn project_tangent(base: &StiefelPoint, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.shape() != base.shape() {
        return Err(shape_mismatch("project_tangent", base.shape(), z.shape()));
    }
    let w = base.matrix();
    Ok(z - w * sym(&w.tr_mul(z)))
}

/// Polar retraction `R_W̃(tH)`.
///
/// The inverse square root is taken of the Gram matrix of `W̃ + tH`, which
/// equals `I + t²HᵀH` for tangent `H` and additionally removes any rounding
/// drift of `W̃` away from orthonormality.
pub fn retract(base: &StiefelPoint, h: &DMatrix<f64>, t: f64) -> Result<StiefelPoint> {
    if h.shape() != base.shape() {
        return Err(shape_mismatch("retract", base.shape(), h.shape()));
    }
    if !t.is_finite() {
        return Err(ScaError::InvalidArgument(format!("step {t} is not finite")));
    }
    let residual = base.tangency_residual(h);
    if residual > TANGENT_TOL * h.norm().max(1.0) {
        return Err(ScaError::NotTangent(residual));
    }
    if t == 0.0 {
        return Ok(base.clone());
    }
    let moved = base.matrix() + h * t;
    let gram = moved.tr_mul(&moved);
    let result = &moved * inv_sqrt_spd(&gram, EIGEN_FLOOR);
    if !crate::linalg::all_finite(&result) {
        return Err(ScaError::NonFinite("retraction"));
    }
    Ok(StiefelPoint(result))
}

/// Move both factors along `direction`: `(W + t·dw, R_W̃(t·dh))`.
pub fn retract_product(
    point: &ProductPoint,
    direction: &TangentPair,
    t: f64,
) -> Result<ProductPoint> {
    if direction.shape() != point.shape() {
        return Err(shape_mismatch(
            "retract_product",
            point.shape(),
            direction.shape(),
        ));
    }
    Ok(ProductPoint {
        w: &point.w + &direction.dw * t,
        w_tilde: retract(&point.w_tilde, &direction.dh, t)?,
    })
}

/// Product metric: `tr(P₁ᵀP₂) + tr(Q₁ᵀQ₂)`.
pub fn inner(a: &TangentPair, b: &TangentPair) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_mismatch("inner", a.shape(), b.shape()));
    }
    Ok(frob_inner(&a.dw, &b.dw) + frob_inner(&a.dh, &b.dh))
}

/// Projection-based vector transport to `new_base`.
pub fn transport(new_base: &StiefelPoint, v: &TangentPair) -> Result<TangentPair> {
    Ok(TangentPair {
        dw: v.dw.clone(),
        dh: project_tangent(new_base, &v.dh)?,
    })
}

/// Riemannian gradient from the Euclidean gradient `(∂f/∂W, ∂f/∂W̃)`.
pub fn riemannian_grad(
    point: &ProductPoint,
    grad_w: &DMatrix<f64>,
    grad_w_tilde: &DMatrix<f64>,
) -> Result<TangentPair> {
    if grad_w.shape() != point.shape() {
        return Err(shape_mismatch(
            "riemannian_grad",
            point.shape(),
            grad_w.shape(),
        ));
    }
    Ok(TangentPair {
        dw: grad_w.clone(),
        dh: project_tangent(&point.w_tilde, grad_w_tilde)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize, p: usize) -> StiefelPoint {
        StiefelPoint::from_qr(&randn(rng, n, p)).unwrap()
    }

    #[test]
    fn project_base_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_point(&mut rng, 6, 3);
        let h = project_tangent(&b, b.matrix()).unwrap();
        assert!(h.norm() < 1e-14);
    }

    #[test]
    fn project_keeps_tangent_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_point(&mut rng, 7, 3);
        let w = b.matrix();
        // W Ω + (I − WWᵀ)K with Ω skew is tangent by construction.
        let a = randn(&mut rng, 3, 3);
        let omega = &a - a.transpose();
        let k = randn(&mut rng, 7, 3);
        let h = w * omega + &k - w * w.tr_mul(&k);
        let ph = project_tangent(&b, &h).unwrap();
        assert!((ph - &h).norm() < 1e-12);
        let z = randn(&mut rng, 7, 3);
        let pz = project_tangent(&b, &z).unwrap();
        assert!(b.tangency_residual(&pz) < 1e-10);
    }

    #[test]
    fn retract_at_zero_and_zero_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_point(&mut rng, 5, 2);
        let h = project_tangent(&b, &randn(&mut rng, 5, 2)).unwrap();
        assert!((retract(&b, &h, 0.0).unwrap().matrix() - b.matrix()).norm() <= 1e-14);
        let zero = DMatrix::zeros(5, 2);
        assert!((retract(&b, &zero, 3.7).unwrap().matrix() - b.matrix()).norm() <= 1e-14);
    }

    #[test]
    fn retract_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_point(&mut rng, 9, 4);
        let h = project_tangent(&b, &randn(&mut rng, 9, 4)).unwrap();
        let r = retract(&b, &h, 0.37).unwrap();
        assert!(orthonormality_residual(r.matrix()) <= 1e-10);
    }

    #[test]
    fn retract_rejects_non_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_point(&mut rng, 5, 2);
        let err = retract(&b, b.matrix(), 0.1).unwrap_err();
        assert!(matches!(err, ScaError::NotTangent(_)));
    }

    #[test]
    fn inner_examples() {
        let i = DMatrix::<f64>::identity(2, 2);
        let a = TangentPair::new(i.clone(), i.clone()).unwrap();
        assert_eq!(inner(&a, &a).unwrap(), 4.0);
        assert_eq!(inner(&a, &TangentPair::zeros(2, 2)).unwrap(), 0.0);
        assert!(inner(&a, &TangentPair::zeros(3, 2)).is_err());
    }

    #[test]
    fn transport_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_point(&mut rng, 6, 2);
        let h = project_tangent(&b, &randn(&mut rng, 6, 2)).unwrap();
        let v = TangentPair::new(randn(&mut rng, 6, 2), h).unwrap();
        let tv = transport(&b, &v).unwrap();
        assert!((tv.dh - &v.dh).norm() < 1e-12);
        assert_eq!(tv.dw, v.dw);
        let z = transport(&b, &TangentPair::zeros(6, 2)).unwrap();
        assert_eq!(z.dh.norm(), 0.0);
    }

    #[test]
    fn riemannian_grad_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = random_point(&mut rng, 4, 2);
        let pt = ProductPoint::new(DMatrix::zeros(4, 2), b).unwrap();
        let g = riemannian_grad(&pt, &DMatrix::zeros(4, 2), &DMatrix::zeros(4, 2)).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(StiefelPoint::new(DMatrix::from_element(3, 2, 1.0)).is_err());
        assert!(StiefelPoint::new(DMatrix::identity(2, 3)).is_err());
        let s = StiefelPoint::new(DMatrix::identity(3, 2)).unwrap();
        assert!(ProductPoint::new(DMatrix::zeros(3, 1), s).is_err());
    }
}
