//! Second-order component analysis: offline training and online detection.
//!
//! Offline: scale the normal training data, expand every sample to
//! `[1, x, x⊗x]`, fit `(W, W̃)` by conjugate gradient on
//! `St(N, p) × E(N, p)`, then fit a T² monitor on the features
//! `G = σ(Wᵀ𝔛)`. Online: scale with the training statistics, expand, encode
//! and compare T² against the control limit.

use nalgebra::{DMatrix, DVector};

use crate::activation::Activations;
use crate::data::{expand_sample, expand_second_order, expanded_dim, DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::manifold::StiefelPoint;
use crate::monitor::{DetectionReport, LimitRule, T2Monitor, DEFAULT_ZETA};
use crate::optimizer::{cg_optimize, initial_point, CgConfig, CgTrace, ReconstructionCost};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub p: usize,
    pub activations: Activations,
    pub cg: CgConfig,
    pub zeta: f64,
    pub rule: LimitRule,
}

impl ScaOptions {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            activations: Activations::default(),
            cg: CgConfig::default(),
            zeta: DEFAULT_ZETA,
            rule: LimitRule::Coverage,
        }
    }
}

/// Everything needed to score new samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaModel {
    pub scaler: Scaler,
    pub w: DMatrix<f64>,
    pub w_tilde: StiefelPoint,
    pub activations: Activations,
    pub monitor: T2Monitor,
}

impl ScaModel {
    pub fn n_vars(&self) -> usize {
        self.scaler.n_vars()
    }

    pub fn p(&self) -> usize {
        self.w.ncols()
    }

    pub fn tau(&self) -> f64 {
        self.monitor.tau
    }

    /// `g = σ(Wᵀ · expand(scale(x)))` for one raw sample.
    pub fn encode(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.n_vars() {
            return Err(ScaError::DimensionMismatch {
                context: "encode",
                expected: format!("{} variables", self.n_vars()),
                actual: format!("{} variables", x.len()),
            });
        }
        let scaled: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.scaler.mean[j]) / self.scaler.std[j])
            .collect();
        let e = DVector::from_vec(expand_sample(&scaled));
        let enc = self.activations.encoder;
        Ok((self.w.transpose() * e).map(|v| enc.apply(v)))
    }

    /// Features of every sample (p × m).
    pub fn features(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        let scaled = self.scaler.apply(x)?;
        let expanded = expand_second_order(&scaled)?;
        let enc = self.activations.encoder;
        Ok((self.w.transpose() * expanded.values()).map(|v| enc.apply(v)))
    }

    pub fn t2(&self, g: &DVector<f64>) -> f64 {
        self.monitor.t2(g)
    }

    /// Per-sample T² and alarms (`T² > τ`).
    pub fn detect(&self, x: &DataMatrix) -> Result<DetectionReport> {
        self.monitor.report(&self.features(x)?)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let big_n = expanded_dim(self.n_vars());
        if self.w.shape() != self.w_tilde.shape() || self.w.nrows() != big_n {
            return Err(ScaError::ModelFormat(format!(
                "weights must be {big_n}x{}",
                self.w.ncols()
            )));
        }
        if self.monitor.feature_dim() != self.p() {
            return Err(ScaError::ModelFormat("monitor dimension differs from p".into()));
        }
        self.monitor.validate()
    }
}

/// Offline training on normal data. Returns the model and the optimizer trace.
pub fn train(x_train: &DataMatrix, opts: &ScaOptions) -> Result<(ScaModel, CgTrace)> {
    let m = x_train.n_samples();
    let n = x_train.n_vars();
    let big_n = expanded_dim(n);
    if opts.p == 0 || opts.p > big_n {
        return Err(ScaError::InvalidArgument(format!(
            "feature dimension p must be in 1..={big_n}, got {}",
            opts.p
        )));
    }
    if m < opts.p + 2 {
        return Err(ScaError::TooFewSamples {
            needed: opts.p + 2,
            got: m,
        });
    }
    let scaler = Scaler::fit(x_train)?;
    let expanded = expand_second_order(&scaler.apply(x_train)?)?;
    let objective = ReconstructionCost::new(expanded.values(), opts.activations);
    let init = initial_point(big_n, opts.p, opts.cg.seed)?;
    let (point, trace) = cg_optimize(&objective, init, &opts.cg)?;

    let enc = opts.activations.encoder;
    let g = (point.w.transpose() * expanded.values()).map(|v| enc.apply(v));
    let monitor = T2Monitor::fit(&g, opts.zeta, opts.rule)?;
    Ok((
        ScaModel {
            scaler,
            w: point.w,
            w_tilde: point.w_tilde,
            activations: opts.activations,
            monitor,
        },
        trace,
    ))
}
