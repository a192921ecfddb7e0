//! Hotelling-type T² monitoring with a kernel-density control limit.
//!
//! Every method in the crate reduces a sample to a feature vector `g`; this
//! module turns features into `T² = gᵀ Σ_g⁻¹ g`, estimates the density of the
//! training T² values with a Gaussian KDE and places the control limit at
//! the requested coverage.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ScaError};
use crate::linalg::{sample_covariance, spd_inverse, sym};

/// Default significance level.
pub const DEFAULT_ZETA: f64 = 0.01;
/// Relative ridge added to the feature covariance before inversion.
pub const COVARIANCE_RIDGE: f64 = 1e-8;
/// Grid resolution of the numeric KDE CDF.
pub const CDF_GRID_POINTS: usize = 4096;
/// Minimum number of training statistics for a control limit.
pub const MIN_LIMIT_SAMPLES: usize = 10;

/// How the significance level maps onto the KDE CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LimitRule {
    /// `∫ ρ̂ = 1 − ζ` up to the limit (a 99% limit at ζ = 0.01).
    #[default]
    Coverage,
    /// `∫ ρ̂ = ζ` up to the limit, the formula taken at face value.
    Literal,
}

impl LimitRule {
    pub fn name(self) -> &'static str {
        match self {
            LimitRule::Coverage => "coverage",
            LimitRule::Literal => "literal",
        }
    }
}

impl std::str::FromStr for LimitRule {
    type Err = ScaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Self::Coverage),
            "literal" | "raw" => Ok(Self::Literal),
            other => Err(ScaError::InvalidArgument(format!(
                "unknown limit rule {other:?}"
            ))),
        }
    }
}

/// Gaussian KDE `(1/(√(2π) h N)) Σ exp(−(q − Tᵢ)²/(2h²))`.
pub fn kde_pdf(samples: &[f64], h: f64, query: f64) -> f64 {
    if samples.is_empty() || !(h > 0.0) {
        return 0.0;
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * h * samples.len() as f64);
    let inv = 1.0 / (2.0 * h * h);
    norm * samples
        .iter()
        .map(|t| (-(query - t).powi(2) * inv).exp())
        .sum::<f64>()
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Silverman's rule `h = 1.06 σ̂ N^{-1/5}`, floored at `1e-6·max(1, mean)` for
/// degenerate samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let (mean, sd) = mean_std(samples);
    let h = 1.06 * sd * (samples.len() as f64).powf(-0.2);
    let floor = 1e-6 * mean.abs().max(1.0);
    if h.is_finite() && h > floor {
        h
    } else {
        floor
    }
}

/// Control limit and the bandwidth it was computed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimit {
    pub tau: f64,
    pub bandwidth: f64,
}

/// KDE control limit for T² statistics at significance `zeta`.
///
/// The density is integrated from 0 (T² is non-negative) with the trapezoid
/// rule on a [`CDF_GRID_POINTS`]-point grid and renormalized by its mass on
/// `[0, ∞)`, so kernel mass spilling below zero does not bias the quantile.
/// The limit is then located by bisection inside the bracketing grid cell.
pub fn control_limit(samples: &[f64], zeta: f64, rule: LimitRule) -> Result<ControlLimit> {
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(ScaError::InvalidArgument(format!(
            "significance level must be in (0, 0.5], got {zeta}"
        )));
    }
    if samples.len() < MIN_LIMIT_SAMPLES {
        return Err(ScaError::TooFewSamples {
            needed: MIN_LIMIT_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(ScaError::NonFinite("T² samples"));
    }
    let h = silverman_bandwidth(samples);
    let target = match rule {
        LimitRule::Coverage => 1.0 - zeta,
        LimitRule::Literal => zeta,
    };

    let smin = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Below min − 8h the density is < 1e-14 of its peak contribution; the
    // grid starts there (or at 0) so that tight clusters are resolved.
    let lo = (smin - 8.0 * h).max(0.0);
    let hi = smax + 8.0 * h;
    let n = CDF_GRID_POINTS;
    let dx = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + dx * i as f64).collect();
    let pdf: Vec<f64> = grid.iter().map(|&q| kde_pdf(samples, h, q)).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * dx * (pdf[i - 1] + pdf[i]);
    }
    let total = cdf[n - 1];
    if !(total > 0.0) {
        return Err(ScaError::Numerical("KDE has no mass on [0, inf)".into()));
    }
    let want = target * total;
    let cell = cdf.partition_point(|&c| c < want).clamp(1, n - 1) - 1;
    let (a, pa, ca) = (grid[cell], pdf[cell], cdf[cell]);
    let partial = |x: f64| ca + 0.5 * (x - a) * (pa + kde_pdf(samples, h, x));
    let (mut l, mut r) = (a, grid[cell + 1]);
    for _ in 0..100 {
        let mid = 0.5 * (l + r);
        if partial(mid) < want {
            l = mid;
        } else {
            r = mid;
        }
        if r - l <= 1e-15 * r.abs().max(1.0) {
            break;
        }
    }
    Ok(ControlLimit {
        tau: 0.5 * (l + r),
        bandwidth: h,
    })
}

/// `gᵀ Σ⁻¹ g`, clamped at zero against rounding.
pub fn t2(sigma_inv: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    (g.transpose() * sigma_inv * g)[(0, 0)].max(0.0)
}

/// T² of every column of `features` (p × m).
pub fn t2_columns(sigma_inv: &DMatrix<f64>, features: &DMatrix<f64>) -> Vec<f64> {
    let sg = sigma_inv * features;
    sg.column_iter()
        .zip(features.column_iter())
        .map(|(a, b)| a.dot(&b).max(0.0))
        .collect()
}

/// Regularized inverse feature covariance: `(Σ_g + ε·tr(Σ_g)/p · I)⁻¹`.
pub fn inverse_feature_covariance(features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = features.nrows();
    if features.ncols() < 2 {
        return Err(ScaError::TooFewSamples {
            needed: 2,
            got: features.ncols(),
        });
    }
    let mut cov = sample_covariance(features);
    let trace = cov.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(ScaError::Numerical(
            "feature covariance is zero or non-finite".into(),
        ));
    }
    let ridge = COVARIANCE_RIDGE * trace / p as f64;
    for i in 0..p {
        cov[(i, i)] += ridge;
    }
    spd_inverse(&cov).map_err(|_| {
        ScaError::Numerical("feature covariance singular beyond ridge repair".into())
    })
}

/// Fitted T² monitor shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct T2Monitor {
    pub sigma_g_inv: DMatrix<f64>,
    pub t2_train: Vec<f64>,
    pub bandwidth: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rule: LimitRule,
}

impl T2Monitor {
    /// Fit on training features (p × m).
    pub fn fit(features: &DMatrix<f64>, zeta: f64, rule: LimitRule) -> Result<Self> {
        let sigma_g_inv = inverse_feature_covariance(features)?;
        let t2_train = t2_columns(&sigma_g_inv, features);
        let limit = control_limit(&t2_train, zeta, rule)?;
        Ok(Self {
            sigma_g_inv,
            t2_train,
            bandwidth: limit.bandwidth,
            tau: limit.tau,
            zeta,
            rule,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.sigma_g_inv.nrows()
    }

    pub fn t2(&self, g: &DVector<f64>) -> f64 {
        t2(&self.sigma_g_inv, g)
    }

    pub fn report(&self, features: &DMatrix<f64>) -> Result<DetectionReport> {
        if features.nrows() != self.feature_dim() {
            return Err(crate::error::shape_mismatch(
                "monitor features",
                (self.feature_dim(), features.ncols()),
                features.shape(),
            ));
        }
        Ok(DetectionReport::from_t2(t2_columns(&self.sigma_g_inv, features), self.tau))
    }

    /// Recompute the limit at another significance level, keeping Σ_g.
    pub fn with_zeta(&self, zeta: f64) -> Result<Self> {
        let limit = control_limit(&self.t2_train, zeta, self.rule)?;
        Ok(Self {
            bandwidth: limit.bandwidth,
            tau: limit.tau,
            zeta,
            ..self.clone()
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let s = &self.sigma_g_inv;
        if !s.is_square() || (s - s.transpose()).amax() > 1e-10 * s.amax().max(1.0) {
            return Err(ScaError::ModelFormat(
                "inverse covariance is not symmetric".into(),
            ));
        }
        if !(self.bandwidth > 0.0) || !(self.tau >= 0.0) {
            return Err(ScaError::ModelFormat("non-positive bandwidth or limit".into()));
        }
        Ok(())
    }
}

/// Per-sample statistics and alarms; rates are percentages filled by [`score`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub t2: Vec<f64>,
    pub flags: Vec<bool>,
    pub tau: f64,
    pub mdr: Option<f64>,
    pub far: Option<f64>,
}

impl DetectionReport {
    pub fn from_t2(t2: Vec<f64>, tau: f64) -> Self {
        let flags = t2.iter().map(|&v| v > tau).collect();
        Self {
            t2,
            flags,
            tau,
            mdr: None,
            far: None,
        }
    }

    pub fn alarm_rate(&self) -> f64 {
        if self.flags.is_empty() {
            return 0.0;
        }
        self.flags.iter().filter(|f| **f).count() as f64 / self.flags.len() as f64
    }

    /// Fill MDR/FAR assuming the first `normal_count` samples are normal.
    pub fn scored(mut self, normal_count: usize) -> Result<Self> {
        let (mdr, far) = score(&self.flags, normal_count)?;
        self.mdr = Some(mdr);
        self.far = Some(far);
        Ok(self)
    }

    /// Chart rows `index,t2,tau,label,flag` (label 1 = faulty segment).
    pub fn write_chart_csv(&self, mut w: impl std::io::Write, normal_count: usize) -> std::io::Result<()> {
        writeln!(w, "index,t2,tau,label,flag")?;
        for (i, (t, f)) in self.t2.iter().zip(&self.flags).enumerate() {
            let label = u8::from(i >= normal_count);
            writeln!(w, "{i},{t:?},{:?},{label},{}", self.tau, u8::from(*f))?;
        }
        Ok(())
    }
}

/// `(MDR, FAR)` in percent: missed alarms after `normal_count`, false alarms before.
pub fn score(flags: &[bool], normal_count: usize) -> Result<(f64, f64)> {
    if normal_count == 0 || normal_count >= flags.len() {
        return Err(ScaError::InvalidArgument(format!(
            "need non-empty normal and faulty segments, got {normal_count} normal of {}",
            flags.len()
        )));
    }
    let (normal, faulty) = flags.split_at(normal_count);
    let false_alarms = normal.iter().filter(|f| **f).count();
    let missed = faulty.iter().filter(|f| !**f).count();
    Ok((
        100.0 * missed as f64 / faulty.len() as f64,
        100.0 * false_alarms as f64 / normal.len() as f64,
    ))
}

/// Symmetrize in place (used after deserialization).
pub(crate) fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    sym(&m)
}
