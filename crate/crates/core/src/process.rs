//! Synthetic data: the heteroscedastic three-variable toy process and the
//! two-Gaussian posterior used to motivate second-order terms.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Result, ScaError};

/// Noise-free toy process output for latent `(t₁, t₂)`.
pub fn toy_process(t1: f64, t2: f64) -> [f64; 3] {
    [
        t1,
        t1.powi(3) - 4.5 * t2 * t2 + 6.0 * t1 + t2,
        3.0 * t1.powi(4) - t2.powi(3) + 3.0 * t2 * t2,
    ]
}

/// Fault: every variable shifted by +1.
pub fn toy_fault(x: [f64; 3]) -> [f64; 3] {
    x.map(|v| v + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    pub train_m: usize,
    pub normal_m: usize,
    pub fault_m: usize,
    pub train_noise: f64,
    pub test_noise: f64,
    /// Read `train_noise`/`test_noise` as standard deviations instead of variances.
    pub noise_as_sd: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_m: 500,
            normal_m: 100,
            fault_m: 400,
            train_noise: 0.1,
            test_noise: 0.5,
            noise_as_sd: false,
        }
    }
}

/// Training set and a test set whose first `normal_m` samples are normal.
#[derive(Debug, Clone)]
pub struct ToyData {
    pub train: DataMatrix,
    pub test: DataMatrix,
    pub normal_count: usize,
}

fn noise_sd(param: f64, as_sd: bool) -> f64 {
    if as_sd {
        param
    } else {
        param.sqrt()
    }
}

fn draw<R: Rng>(rng: &mut R, noise: &Normal<f64>, fault: bool) -> [f64; 3] {
    let t1: f64 = StandardNormal.sample(rng);
    let t2: f64 = StandardNormal.sample(rng);
    let mut x = toy_process(t1, t2);
    for v in &mut x {
        *v += noise.sample(rng);
    }
    if fault {
        toy_fault(x)
    } else {
        x
    }
}

pub fn generate_toy(cfg: &ToyConfig) -> Result<ToyData> {
    if cfg.train_m < 2 || cfg.normal_m == 0 || cfg.fault_m == 0 {
        return Err(ScaError::InvalidArgument(
            "toy process needs >= 2 training, >= 1 normal and >= 1 faulty samples".into(),
        ));
    }
    if !(cfg.train_noise >= 0.0 && cfg.test_noise >= 0.0) {
        return Err(ScaError::InvalidArgument("noise parameters must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train_noise = Normal::new(0.0, noise_sd(cfg.train_noise, cfg.noise_as_sd))
        .map_err(|e| ScaError::InvalidArgument(e.to_string()))?;
    let test_noise = Normal::new(0.0, noise_sd(cfg.test_noise, cfg.noise_as_sd))
        .map_err(|e| ScaError::InvalidArgument(e.to_string()))?;

    let train: Vec<[f64; 3]> = (0..cfg.train_m)
        .map(|_| draw(&mut rng, &train_noise, false))
        .collect();
    let test: Vec<[f64; 3]> = (0..cfg.normal_m + cfg.fault_m)
        .map(|i| draw(&mut rng, &test_noise, i >= cfg.normal_m))
        .collect();
    let names = || vec!["x1".to_string(), "x2".to_string(), "x3".to_string()];
    let to_matrix = |s: &[[f64; 3]]| DMatrix::from_fn(3, s.len(), |j, i| s[i][j]);
    Ok(ToyData {
        train: DataMatrix::new(to_matrix(&train))?.with_names(names())?,
        test: DataMatrix::new(to_matrix(&test))?.with_names(names())?,
        normal_count: cfg.normal_m,
    })
}

/// Two isotropic Gaussian classes with equal priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    pub mu0: f64,
    pub mu1: f64,
    pub sd0: f64,
    pub sd1: f64,
}

impl GaussianPair {
    pub fn new(mu0: f64, mu1: f64, sd0: f64, sd1: f64) -> Result<Self> {
        if !(sd0 > 0.0 && sd1 > 0.0) {
            return Err(ScaError::InvalidArgument("class standard deviations must be > 0".into()));
        }
        Ok(Self { mu0, mu1, sd0, sd1 })
    }

    /// Coefficients `(a, b, c)` of the log likelihood ratio
    /// `log p(x|1)/p(x|0) = −(a x² − b x + c) − log(σ₁/σ₀)`.
    pub fn quadratic_coefficients(&self) -> (f64, f64, f64) {
        let (v0, v1) = (self.sd0 * self.sd0, self.sd1 * self.sd1);
        let a = 1.0 / (2.0 * v0) - 1.0 / (2.0 * v1);
        let b = self.mu0 / v0 - self.mu1 / v1;
        let c = self.mu0 * self.mu0 / (2.0 * v0) - self.mu1 * self.mu1 / (2.0 * v1);
        (a, b, c)
    }

    /// `P(y = 0 | x) = 1 / (1 + (σ₀/σ₁) exp(a x² − b x + c))` for one-dimensional `x`.
    pub fn posterior_normal(&self, x: f64) -> f64 {
        let (a, b, c) = self.quadratic_coefficients();
        let log_ratio = (self.sd0 / self.sd1).ln() + a * x * x - b * x + c;
        1.0 / (1.0 + log_ratio.exp())
    }
}

/// `(x, P(y=0|x))` on `points` evenly spaced values in `[lo, hi]`.
pub fn posterior_curve(pair: &GaussianPair, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 || !(hi > lo) {
        return Err(ScaError::InvalidArgument("grid needs >= 2 points and hi > lo".into()));
    }
    let dx = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let x = lo + dx * i as f64;
            (x, pair.posterior_normal(x))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn process_hand_values() {
        assert_eq!(toy_process(0.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(toy_process(1.0, 0.0), [1.0, 7.0, 3.0]);
        assert_eq!(toy_fault([1.0, 7.0, 3.0]), [2.0, 8.0, 4.0]);
    }

    #[test]
    fn generator_shapes_and_seed() {
        let cfg = ToyConfig {
            seed: 3,
            ..Default::default()
        };
        let a = generate_toy(&cfg).unwrap();
        assert_eq!((a.train.n_vars(), a.train.n_samples()), (3, 500));
        assert_eq!(a.test.n_samples(), 500);
        assert_eq!(a.normal_count, 100);
        let b = generate_toy(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = generate_toy(&ToyConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn identical_classes_give_one_half() {
        let g = GaussianPair::new(0.5, 0.5, 1.3, 1.3).unwrap();
        for (_, p) in posterior_curve(&g, -5.0, 5.0, 41).unwrap() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_variances_give_a_sigmoid() {
        let (mu0, mu1, s) = (-1.0, 2.0, 0.8);
        let g = GaussianPair::new(mu0, mu1, s, s).unwrap();
        let w = (mu0 - mu1) / (s * s);
        let b = -(mu0 * mu0) / (2.0 * s * s) + (mu1 * mu1) / (2.0 * s * s);
        let max_dev = posterior_curve(&g, -4.0, 4.0, 401)
            .unwrap()
            .into_iter()
            .map(|(x, p)| (p - 1.0 / (1.0 + (-(w * x + b)).exp())).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 1e-12, "{max_dev}");
    }

    #[test]
    fn matches_direct_bayes_rule() {
        let g = GaussianPair::new(0.0, 1.5, 1.0, 2.5).unwrap();
        let pdf = |x: f64, mu: f64, s: f64| (-(x - mu).powi(2) / (2.0 * s * s)).exp() / s;
        for &x in &[-3.0, -0.4, 0.0, 1.1, 4.0] {
            let (p0, p1) = (pdf(x, 0.0, 1.0), pdf(x, 1.5, 2.5));
            assert!((g.posterior_normal(x) - p0 / (p0 + p1)).abs() < 1e-14);
        }
    }

    #[test]
    fn unequal_variances_give_quadratic_log_odds() {
        let g = GaussianPair::new(0.0, 1.0, 1.0, 2.0).unwrap();
        let (a, _, _) = g.quadratic_coefficients();
        let curve = posterior_curve(&g, -3.0, 3.0, 61).unwrap();
        let dx = 0.1;
        let logit: Vec<f64> = curve.iter().map(|(_, p)| ((1.0 - p) / p).ln()).collect();
        for w in logit.windows(3) {
            let second = w[2] - 2.0 * w[1] + w[0];
            assert!((second - 2.0 * a * dx * dx).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(GaussianPair::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(generate_toy(&ToyConfig { fault_m: 0, ..Default::default() }).is_err());
    }
}
