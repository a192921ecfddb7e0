use nalgebra::{DMatrix, DVector};

use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::linalg::{sample_covariance, sym_eigen_desc};
use crate::monitor::{DetectionReport, LimitRule, T2Monitor};

/// Number of retained components: fixed, or the smallest count whose
/// eigenvalue mass reaches the given energy fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Components {
    Fixed(usize),
    Energy(f64),
}

/// Smallest `k` with `Σ_{i<k} λᵢ / Σ λᵢ ≥ energy`.
pub fn components_for_energy(eigenvalues: &[f64], energy: f64) -> usize {
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let mut acc = 0.0;
    for (k, l) in eigenvalues.iter().enumerate() {
        acc += l.max(0.0);
        // Relative slack so that exact ratios such as 0.85 are not lost to rounding.
        if acc >= energy * total * (1.0 - 1e-12) {
            return k + 1;
        }
    }
    eigenvalues.len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub scaler: Scaler,
    /// n × p, columns ordered by descending eigenvalue.
    pub loading: DMatrix<f64>,
    /// All eigenvalues of the scaled-data covariance, descending.
    pub eigenvalues: DVector<f64>,
    pub monitor: T2Monitor,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.loading.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.scaler.n_vars()
    }

    /// Scores `G = Wᵀ x_scaled` (p × m).
    pub fn features(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        Ok(self.loading.transpose() * self.scaler.apply(x)?.values())
    }

    pub fn detect(&self, x: &DataMatrix) -> Result<DetectionReport> {
        self.monitor.report(&self.features(x)?)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.loading.nrows() != self.n_vars() || self.monitor.feature_dim() != self.p() {
            return Err(ScaError::ModelFormat("PCA dimensions are inconsistent".into()));
        }
        self.monitor.validate()
    }
}

pub fn pca_fit(x: &DataMatrix, components: Components, zeta: f64, rule: LimitRule) -> Result<PcaModel> {
    let m = x.n_samples();
    if m < 2 {
        return Err(ScaError::TooFewSamples { needed: 2, got: m });
    }
    let scaler = Scaler::fit(x)?;
    let z = scaler.apply(x)?;
    let (vals, vecs) = sym_eigen_desc(&sample_covariance(z.values()));
    let n = vals.len();
    let p = match components {
        Components::Fixed(p) => p,
        Components::Energy(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(ScaError::InvalidArgument(format!(
                    "energy fraction must be in (0, 1], got {e}"
                )));
            }
            components_for_energy(vals.as_slice(), e)
        }
    };
    if p == 0 || p > n {
        return Err(ScaError::InvalidArgument(format!(
            "PCA dimension must be in 1..={n}, got {p}"
        )));
    }
    if !(vals[p - 1] > 1e-12 * vals[0].max(f64::MIN_POSITIVE)) {
        return Err(ScaError::Numerical(format!(
            "covariance has rank below p = {p}"
        )));
    }
    let loading = vecs.columns(0, p).into_owned();
    let g = loading.transpose() * z.values();
    let monitor = T2Monitor::fit(&g, zeta, rule)?;
    Ok(PcaModel {
        scaler,
        loading,
        eigenvalues: vals,
        monitor,
    })
}
