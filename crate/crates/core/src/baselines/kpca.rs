use nalgebra::{DMatrix, DVector};

use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::linalg::sym_eigen_desc;
use crate::monitor::{DetectionReport, LimitRule, T2Monitor};

/// Gaussian kernel `exp(−‖a − b‖² / c)`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], c: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / c).exp()
}

/// Kernel width `c = 10 · n · δ̄`, with δ̄ the mean per-variable sample std
/// of the data the kernel sees.
pub fn kernel_width(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let m = x.ncols();
    let mean_std = x
        .row_iter()
        .map(|row| {
            let mu = row.mean();
            (row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m.max(2) - 1) as f64).sqrt()
        })
        .sum::<f64>()
        / n as f64;
    let c = 10.0 * n as f64 * mean_std;
    if c > 0.0 {
        c
    } else {
        10.0 * n as f64
    }
}

/// Gram matrix between the columns of `a` and `b`.
pub fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let acols: Vec<Vec<f64>> = a.column_iter().map(|v| v.iter().copied().collect()).collect();
    let bcols: Vec<Vec<f64>> = b.column_iter().map(|v| v.iter().copied().collect()).collect();
    DMatrix::from_fn(acols.len(), bcols.len(), |i, j| gaussian_kernel(&acols[i], &bcols[j], c))
}

/// `K − 1K − K1 + 1K1` with `1 = ones/m`.
pub fn center_gram(k: &DMatrix<f64>) -> DMatrix<f64> {
    let m = k.nrows();
    let col_means = k.row_mean(); // mean over rows, one per column
    let row_means = k.column_mean();
    let all = k.mean();
    DMatrix::from_fn(m, m, |i, j| k[(i, j)] - row_means[i] - col_means[j] + all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel {
    pub scaler: Scaler,
    /// Scaled training samples (n × m), needed to evaluate kernel rows.
    pub train: DMatrix<f64>,
    /// m × p expansion coefficients, `vₖ / √λₖ`.
    pub alpha: DMatrix<f64>,
    /// Leading eigenvalues of the centered Gram matrix, descending.
    pub eigenvalues: DVector<f64>,
    pub width: f64,
    /// Column means of the uncentered training Gram matrix.
    pub gram_col_means: DVector<f64>,
    pub gram_mean: f64,
    pub monitor: T2Monitor,
}

impl KpcaModel {
    pub fn p(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.scaler.n_vars()
    }

    fn project(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        // k is m_train × m_new; center against the training Gram statistics.
        let m = k.nrows();
        let new_means = k.row_mean();
        let centered = DMatrix::from_fn(m, k.ncols(), |i, j| {
            k[(i, j)] - self.gram_col_means[i] - new_means[j] + self.gram_mean
        });
        self.alpha.transpose() * &centered
    }

    /// Nonlinear principal components of every sample (p × m).
    pub fn features(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        let z = self.scaler.apply(x)?;
        Ok(self.project(&gram(&self.train, z.values(), self.width)))
    }

    pub fn detect(&self, x: &DataMatrix) -> Result<DetectionReport> {
        self.monitor.report(&self.features(x)?)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let m = self.train.ncols();
        if self.train.nrows() != self.n_vars()
            || self.alpha.nrows() != m
            || self.gram_col_means.len() != m
            || self.eigenvalues.len() != self.p()
            || self.monitor.feature_dim() != self.p()
        {
            return Err(ScaError::ModelFormat("KPCA dimensions are inconsistent".into()));
        }
        self.monitor.validate()
    }
}

pub fn kpca_fit(x: &DataMatrix, p: usize, zeta: f64, rule: LimitRule) -> Result<KpcaModel> {
    let m = x.n_samples();
    if p == 0 {
        return Err(ScaError::InvalidArgument("KPCA needs p >= 1".into()));
    }
    if m < p + 1 {
        return Err(ScaError::TooFewSamples { needed: p + 1, got: m });
    }
    let scaler = Scaler::fit(x)?;
    let z = scaler.apply(x)?.into_values();
    let width = kernel_width(&z);
    let k = gram(&z, &z, width);
    let kc = center_gram(&k);
    let (vals, vecs) = sym_eigen_desc(&kc);
    let tol = 1e-10 * vals[0].max(f64::MIN_POSITIVE);
    if !(vals[p - 1] > tol) {
        return Err(ScaError::Numerical(format!(
            "p = {p} exceeds the numerically positive rank of the centered kernel"
        )));
    }
    let eigenvalues = DVector::from_iterator(p, vals.iter().take(p).copied());
    let mut alpha = vecs.columns(0, p).into_owned();
    for (j, mut col) in alpha.column_iter_mut().enumerate() {
        col /= eigenvalues[j].sqrt();
    }
    let gram_col_means = k.column_mean();
    let gram_mean = k.mean();
    let features = alpha.transpose() * &kc;
    let monitor = T2Monitor::fit(&features, zeta, rule)?;
    Ok(KpcaModel {
        scaler,
        train: z,
        alpha,
        eigenvalues,
        width,
        gram_col_means,
        gram_mean,
        monitor,
    })
}
