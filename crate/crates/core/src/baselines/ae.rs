//! Single-hidden-layer autoencoder without orthogonality constraints, on
//! either the scaled inputs (AE) or their second-order expansion (SAE).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::{Activation, Activations};
use crate::data::{expand_second_order, expanded_dim, DataMatrix, Scaler};
use crate::error::{Result, ScaError};
use crate::monitor::{DetectionReport, LimitRule, T2Monitor, DEFAULT_ZETA};

/// Encoder/decoder weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct AeParams {
    /// d × p
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    /// d × p
    pub w_dec: DMatrix<f64>,
    pub b_dec: DVector<f64>,
}

/// Gradients, same layout as [`AeParams`].
pub type AeGrad = AeParams;

impl AeParams {
    pub fn zeros(d: usize, p: usize) -> Self {
        Self {
            w: DMatrix::zeros(d, p),
            b: DVector::zeros(p),
            w_dec: DMatrix::zeros(d, p),
            b_dec: DVector::zeros(d),
        }
    }

    pub fn random(d: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (d as f64).sqrt();
        let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| s * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let w = draw(d, p);
        let w_dec = draw(d, p);
        Self {
            w,
            b: DVector::zeros(p),
            w_dec,
            b_dec: DVector::zeros(d),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn p(&self) -> usize {
        self.w.ncols()
    }

    fn axpy(&self, s: f64, g: &AeGrad) -> Self {
        Self {
            w: &self.w + &g.w * s,
            b: &self.b + &g.b * s,
            w_dec: &self.w_dec + &g.w_dec * s,
            b_dec: &self.b_dec + &g.b_dec * s,
        }
    }

    fn is_finite(&self) -> bool {
        [&self.w, &self.w_dec].iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.b.iter().chain(self.b_dec.iter()).all(|v| v.is_finite())
    }

    /// `σ(Wᵀx + b)` for every column.
    pub fn encode(&self, x: &DMatrix<f64>, act: Activation) -> DMatrix<f64> {
        let mut z = self.w.transpose() * x;
        for mut col in z.column_iter_mut() {
            col += &self.b;
        }
        z.map(|v| act.apply(v))
    }
}

/// `Σᵢ ‖xᵢ − σ̃(W̃ σ(Wᵀxᵢ + b) + b̃)‖²`
pub fn ae_cost(params: &AeParams, x: &DMatrix<f64>, act: Activations) -> f64 {
    let g = params.encode(x, act.encoder);
    let mut y = &params.w_dec * g;
    for mut col in y.column_iter_mut() {
        col += &params.b_dec;
    }
    y.zip_map(x, |yi, xi| act.decoder.apply(yi) - xi).norm_squared()
}

pub fn ae_cost_and_grad(params: &AeParams, x: &DMatrix<f64>, act: Activations) -> (f64, AeGrad) {
    let mut z = params.w.transpose() * x;
    for mut col in z.column_iter_mut() {
        col += &params.b;
    }
    let g = z.map(|v| act.encoder.apply(v));
    let mut y = &params.w_dec * &g;
    for mut col in y.column_iter_mut() {
        col += &params.b_dec;
    }
    let e = y.zip_map(x, |yi, xi| act.decoder.apply(yi) - xi);
    let cost = e.norm_squared();
    let d = e.zip_map(&y, |ei, yi| 2.0 * ei * act.decoder.derivative(yi));
    let grad_w_dec = &d * g.transpose();
    let grad_b_dec = d.column_sum();
    let dz = (params.w_dec.transpose() * &d).zip_map(&z, |gi, zi| gi * act.encoder.derivative(zi));
    let grad_w = x * dz.transpose();
    let grad_b = dz.column_sum();
    (
        cost,
        AeParams {
            w: grad_w,
            b: grad_b,
            w_dec: grad_w_dec,
            b_dec: grad_b_dec,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeConfig {
    pub p: usize,
    pub activations: Activations,
    pub max_epochs: usize,
    /// Step on the per-sample mean gradient.
    pub learning_rate: f64,
    /// Stop once an accepted epoch improves the cost by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
    pub zeta: f64,
    pub rule: LimitRule,
}

impl AeConfig {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            activations: Activations::default(),
            max_epochs: 2000,
            learning_rate: 0.05,
            rel_tol: 1e-7,
            seed: 0,
            zeta: DEFAULT_ZETA,
            rule: LimitRule::Coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeTrace {
    pub cost_per_epoch: Vec<f64>,
    pub epochs: usize,
    pub final_learning_rate: f64,
    pub wall_time: f64,
}

/// Full-batch gradient descent with a fixed step that is halved whenever a
/// step would increase the cost (the step is then retried, never accepted).
pub fn fit_params(
    x: &DMatrix<f64>,
    init: AeParams,
    cfg: &AeConfig,
) -> Result<(AeParams, AeTrace)> {
    let start = std::time::Instant::now();
    let m = x.ncols() as f64;
    let mut params = init;
    let (mut cost, mut grad) = ae_cost_and_grad(&params, x, cfg.activations);
    if !cost.is_finite() {
        return Err(ScaError::Diverged("initial cost is not finite".into()));
    }
    let mut lr = cfg.learning_rate;
    let mut costs = vec![cost];
    let mut epochs = 0;
    let mut halvings = 0;
    while epochs < cfg.max_epochs && cost > 0.0 {
        let candidate = params.axpy(-lr / m, &grad);
        let (c_new, g_new) = ae_cost_and_grad(&candidate, x, cfg.activations);
        if c_new.is_finite() && c_new <= cost && candidate.is_finite() {
            let improvement = cost - c_new;
            params = candidate;
            cost = c_new;
            grad = g_new;
            epochs += 1;
            costs.push(cost);
            if improvement <= cfg.rel_tol * cost {
                break;
            }
        } else {
            lr *= 0.5;
            halvings += 1;
            if halvings > 200 {
                return Err(ScaError::Diverged(
                    "step size underflow while halving".into(),
                ));
            }
        }
    }
    Ok((
        params,
        AeTrace {
            cost_per_epoch: costs,
            epochs,
            final_learning_rate: lr,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Fitted AE or SAE with its monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub scaler: Scaler,
    pub params: AeParams,
    pub activations: Activations,
    /// Inputs are expanded to second order before encoding (SAE).
    pub second_order: bool,
    pub monitor: T2Monitor,
}

impl AeModel {
    pub fn n_vars(&self) -> usize {
        self.scaler.n_vars()
    }

    pub fn p(&self) -> usize {
        self.params.p()
    }

    fn inputs(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        let z = self.scaler.apply(x)?;
        if self.second_order {
            Ok(expand_second_order(&z)?.values().clone())
        } else {
            Ok(z.into_values())
        }
    }

    pub fn features(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        Ok(self.params.encode(&self.inputs(x)?, self.activations.encoder))
    }

    pub fn detect(&self, x: &DataMatrix) -> Result<DetectionReport> {
        self.monitor.report(&self.features(x)?)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let d = if self.second_order {
            expanded_dim(self.n_vars())
        } else {
            self.n_vars()
        };
        let p = self.p();
        let ok = self.params.w.shape() == (d, p)
            && self.params.w_dec.shape() == (d, p)
            && self.params.b_dec.len() == d
            && self.params.b.len() == p
            && self.monitor.feature_dim() == p;
        if !ok {
            return Err(ScaError::ModelFormat("autoencoder dimensions are inconsistent".into()));
        }
        self.monitor.validate()
    }
}

fn train_impl(x: &DataMatrix, cfg: &AeConfig, second_order: bool) -> Result<(AeModel, AeTrace)> {
    let m = x.n_samples();
    if m < 2 {
        return Err(ScaError::TooFewSamples { needed: 2, got: m });
    }
    let scaler = Scaler::fit(x)?;
    let z = scaler.apply(x)?;
    let inputs = if second_order {
        expand_second_order(&z)?.values().clone()
    } else {
        z.into_values()
    };
    let d = inputs.nrows();
    if cfg.p == 0 || cfg.p > d {
        return Err(ScaError::InvalidArgument(format!(
            "hidden width must be in 1..={d}, got {}",
            cfg.p
        )));
    }
    let (params, trace) = fit_params(&inputs, AeParams::random(d, cfg.p, cfg.seed), cfg)?;
    let g = params.encode(&inputs, cfg.activations.encoder);
    let monitor = T2Monitor::fit(&g, cfg.zeta, cfg.rule)?;
    Ok((
        AeModel {
            scaler,
            params,
            activations: cfg.activations,
            second_order,
            monitor,
        },
        trace,
    ))
}

/// Autoencoder on first-order (scaled) inputs.
pub fn ae_train(x: &DataMatrix, cfg: &AeConfig) -> Result<(AeModel, AeTrace)> {
    train_impl(x, cfg, false)
}

/// Autoencoder on second-order expanded inputs, no orthogonality constraint.
pub fn sae_train(x: &DataMatrix, cfg: &AeConfig) -> Result<(AeModel, AeTrace)> {
    train_impl(x, cfg, true)
}
