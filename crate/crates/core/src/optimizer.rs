//! Reconstruction cost of the second-order autoencoder and the geometric
//! conjugate-gradient method on `St(N, p) × E(N, p)`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::activation::Activations;
use crate::error::{shape_mismatch, Result, ScaError};
use crate::manifold::{
    inner, retract_product, riemannian_grad, transport, ProductPoint, StiefelPoint, TangentPair,
};

/// Backtracking gives up after this many halvings.
pub const MAX_BACKTRACKS: usize = 60;
/// Window (in iterations) for the relative cost-change stopping rule.
pub const COST_WINDOW: usize = 5;
const GAMMA_DENOM_FLOOR: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls to this value.
    pub grad_tol: f64,
    /// Stop once the cost improves by less than this fraction over [`COST_WINDOW`] iterations.
    pub cost_rel_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-5,
            cost_rel_tol: 1e-9,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            seed: 0,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol >= 0.0
            && self.cost_rel_tol >= 0.0
            && self.armijo_c1 > 0.0
            && self.armijo_c1 < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ScaError::InvalidArgument(format!(
                "invalid optimizer configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    CostStagnation,
    MaxIterations,
    /// Armijo could not be met even along steepest descent; the cost is
    /// flat to working precision around the current iterate.
    LineSearchStalled,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::CostStagnation => "cost_stagnation",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchStalled => "line_search_stalled",
        }
    }
}

/// Convergence history. Entry 0 is the initial point; entry `k` follows step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgTrace {
    pub cost_per_iter: Vec<f64>,
    pub grad_norm_per_iter: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub wall_time: f64,
    pub stop_reason: StopReason,
}

impl CgTrace {
    pub fn final_cost(&self) -> f64 {
        *self.cost_per_iter.last().expect("trace has the initial cost")
    }

    pub fn write_csv_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "iter,cost,grad_norm")?;
        for (k, (c, g)) in self
            .cost_per_iter
            .iter()
            .zip(&self.grad_norm_per_iter)
            .enumerate()
        {
            writeln!(w, "{k},{c:?},{g:?}")?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// A smooth cost on the product manifold with its Euclidean gradient.
pub trait ProductObjective {
    fn cost(&self, point: &ProductPoint) -> Result<f64>;

    /// Cost together with `(∂f/∂W, ∂f/∂W̃)`.
    fn cost_and_grad(&self, point: &ProductPoint) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)>;
}

/// `f(W, W̃) = ‖𝔛 − σ̃(W̃ σ(Wᵀ𝔛))‖²_F` for a fixed data matrix `𝔛` (N × m).
#[derive(Debug, Clone, Copy)]
pub struct ReconstructionCost<'a> {
    data: &'a DMatrix<f64>,
    act: Activations,
}

impl<'a> ReconstructionCost<'a> {
    pub fn new(data: &'a DMatrix<f64>, act: Activations) -> Self {
        Self { data, act }
    }

    fn check(&self, point: &ProductPoint) -> Result<()> {
        if point.w.nrows() != self.data.nrows() {
            return Err(shape_mismatch(
                "reconstruction cost",
                (self.data.nrows(), point.w.ncols()),
                point.shape(),
            ));
        }
        Ok(())
    }

    /// `(Wᵀ𝔛, σ(Wᵀ𝔛), W̃σ(Wᵀ𝔛))`
    fn forward(&self, point: &ProductPoint) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let z = point.w.transpose() * self.data;
        let enc = self.act.encoder;
        let g = z.map(|v| enc.apply(v));
        let y = point.w_tilde.matrix() * &g;
        (z, g, y)
    }

    fn residual(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let dec = self.act.decoder;
        let mut e = y.map(|v| dec.apply(v));
        e -= self.data;
        e
    }
}

fn finite_or_err(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScaError::NonFinite(what))
    }
}

impl ProductObjective for ReconstructionCost<'_> {
    fn cost(&self, point: &ProductPoint) -> Result<f64> {
        self.check(point)?;
        let (_, _, y) = self.forward(point);
        finite_or_err(self.residual(&y).norm_squared(), "reconstruction cost")
    }

    fn cost_and_grad(&self, point: &ProductPoint) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
        self.check(point)?;
        let (z, g, y) = self.forward(point);
        let e = self.residual(&y);
        let f = finite_or_err(e.norm_squared(), "reconstruction cost")?;

        let dec = self.act.decoder;
        let mut d = e * 2.0;
        if dec != crate::activation::Activation::Identity {
            d.zip_apply(&y, |di, yi| *di *= dec.derivative(yi));
        }
        let grad_w_tilde = &d * g.transpose();
        let mut dz = point.w_tilde.matrix().transpose() * &d;
        let enc = self.act.encoder;
        dz.zip_apply(&z, |di, zi| *di *= enc.derivative(zi));
        let grad_w = self.data * dz.transpose();
        if !crate::linalg::all_finite(&grad_w) || !crate::linalg::all_finite(&grad_w_tilde) {
            return Err(ScaError::NonFinite("reconstruction gradient"));
        }
        Ok((f, grad_w, grad_w_tilde))
    }
}

/// Random starting point: `W` i.i.d. normal scaled by `1/√N`, `W̃` the
/// orthonormal factor of a Gaussian matrix.
pub fn initial_point(big_n: usize, p: usize, seed: u64) -> Result<ProductPoint> {
    if p == 0 || p > big_n {
        return Err(ScaError::InvalidArgument(format!(
            "need 1 <= p <= N, got p = {p}, N = {big_n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (big_n as f64).sqrt();
    let w = DMatrix::from_fn(big_n, p, |_, _| {
        scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)
    });
    let raw = DMatrix::from_fn(big_n, p, |_, _| StandardNormal.sample(&mut rng));
    ProductPoint::new(w, StiefelPoint::from_qr(&raw)?)
}

/// An accepted Armijo step.
#[derive(Debug, Clone)]
pub struct Step {
    pub t: f64,
    pub point: ProductPoint,
    pub cost: f64,
    pub evaluations: usize,
}

/// Armijo backtracking from `t_init` along `direction`, given the cost `f0`
/// and Riemannian gradient `grad` at `point`.
pub fn armijo_backtrack<O: ProductObjective + ?Sized>(
    objective: &O,
    point: &ProductPoint,
    f0: f64,
    grad: &TangentPair,
    direction: &TangentPair,
    cfg: &CgConfig,
    t_init: f64,
) -> Result<Step> {
    let slope = inner(grad, direction)?;
    if !(slope < 0.0) {
        return Err(ScaError::NotDescent(slope));
    }
    let mut t = t_init;
    for k in 0..=MAX_BACKTRACKS {
        let candidate = retract_product(point, direction, t)?;
        match objective.cost(&candidate) {
            Ok(f) if f <= f0 + cfg.armijo_c1 * t * slope => {
                return Ok(Step {
                    t,
                    point: candidate,
                    cost: f,
                    evaluations: k + 1,
                })
            }
            Ok(_) | Err(ScaError::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        t *= cfg.backtrack_factor;
    }
    Err(ScaError::LineSearchFailed(MAX_BACKTRACKS))
}

/// Largest `t = initial_step · backtrack_factor^k` satisfying the Armijo
/// condition along `direction`.
pub fn line_search<O: ProductObjective + ?Sized>(
    objective: &O,
    point: &ProductPoint,
    direction: &TangentPair,
    cfg: &CgConfig,
) -> Result<f64> {
    let (f0, gw, gwt) = objective.cost_and_grad(point)?;
    let grad = riemannian_grad(point, &gw, &gwt)?;
    armijo_backtrack(objective, point, f0, &grad, direction, cfg, cfg.initial_step).map(|s| s.t)
}

/// Geometric conjugate gradient with PR+-type direction updates,
/// projection transport and Armijo steps.
pub fn cg_optimize<O: ProductObjective + ?Sized>(
    objective: &O,
    init: ProductPoint,
    cfg: &CgConfig,
) -> Result<(ProductPoint, CgTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut x = init;
    let (mut f, gw, gwt) = objective.cost_and_grad(&x)?;
    let mut grad = riemannian_grad(&x, &gw, &gwt)?;
    let mut dir = grad.scale(-1.0);
    let mut costs = vec![f];
    let mut gnorms = vec![grad.norm()];
    let mut restarts = 0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if grad.norm() <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        if !(inner(&grad, &dir)? < 0.0) {
            dir = grad.scale(-1.0);
            restarts += 1;
        }
        let step = match armijo_backtrack(objective, &x, f, &grad, &dir, cfg, cfg.initial_step) {
            Ok(s) => s,
            Err(ScaError::LineSearchFailed(_)) => {
                dir = grad.scale(-1.0);
                restarts += 1;
                match armijo_backtrack(objective, &x, f, &grad, &dir, cfg, cfg.initial_step) {
                    Ok(s) => s,
                    Err(ScaError::LineSearchFailed(_)) => {
                        stop = StopReason::LineSearchStalled;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };

        let x_new = step.point;
        let (f_new, gw, gwt) = objective.cost_and_grad(&x_new)?;
        let grad_new = riemannian_grad(&x_new, &gw, &gwt)?;

        // Previous gradient and direction live at the old point; carry both over.
        let dir_t = transport(&x_new.w_tilde, &dir)?;
        let grad_t = transport(&x_new.w_tilde, &grad)?;
        let numer = inner(&grad_new, &grad_new)? - inner(&grad_new, &grad_t)?;
        let denom = -inner(&dir_t, &grad_t)?;
        let gamma = if denom > GAMMA_DENOM_FLOOR {
            (numer / denom).max(0.0)
        } else {
            0.0
        };
        if gamma == 0.0 {
            restarts += 1;
        }
        let mut next = dir_t.scale(gamma).axpy(-1.0, &grad_new);
        if !(inner(&grad_new, &next)? < 0.0) {
            next = grad_new.scale(-1.0);
            restarts += 1;
        }

        x = x_new;
        f = f_new;
        grad = grad_new;
        dir = next;
        iterations += 1;
        costs.push(f);
        gnorms.push(grad.norm());

        if iterations >= COST_WINDOW {
            let old = costs[iterations - COST_WINDOW];
            if (old - f).abs() <= cfg.cost_rel_tol * f.abs().max(f64::MIN_POSITIVE) {
                stop = StopReason::CostStagnation;
                break;
            }
        }
    }
    if iterations == cfg.max_iters && stop == StopReason::MaxIterations && grad.norm() <= cfg.grad_tol {
        stop = StopReason::GradientTolerance;
    }

    let trace = CgTrace {
        cost_per_iter: costs,
        grad_norm_per_iter: gnorms,
        iterations,
        restarts,
        wall_time: start.elapsed().as_secs_f64(),
        stop_reason: stop,
    };
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::linalg::{frob_inner, orthonormality_residual};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    /// `‖W − A‖²` on the Euclidean factor only.
    struct Quadratic(DMatrix<f64>);

    impl ProductObjective for Quadratic {
        fn cost(&self, p: &ProductPoint) -> Result<f64> {
            Ok((&p.w - &self.0).norm_squared())
        }
        fn cost_and_grad(&self, p: &ProductPoint) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
            let d = &p.w - &self.0;
            Ok((d.norm_squared(), d * 2.0, DMatrix::zeros(p.w.nrows(), p.w.ncols())))
        }
    }

    #[test]
    fn zero_data_has_zero_cost_and_gradient() {
        let x = DMatrix::zeros(7, 4);
        let pt = initial_point(7, 2, 1).unwrap();
        let obj = ReconstructionCost::new(&x, Activations::default());
        let (f, gw, gwt) = obj.cost_and_grad(&pt).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(gw.norm(), 0.0);
        assert_eq!(gwt.norm(), 0.0);
    }

    #[test]
    fn identity_full_rank_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = randn(&mut rng, 4, 6);
        let i = DMatrix::identity(4, 4);
        let pt = ProductPoint::new(i.clone(), StiefelPoint::new(i).unwrap()).unwrap();
        let f = ReconstructionCost::new(&x, Activations::LINEAR).cost(&pt).unwrap();
        assert!(f < 1e-24);
    }

    #[test]
    fn linear_cost_equals_projector_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, 6, 9);
        let wt = StiefelPoint::from_qr(&randn(&mut rng, 6, 2)).unwrap();
        let pt = ProductPoint::new(wt.matrix().clone(), wt.clone()).unwrap();
        let f = ReconstructionCost::new(&x, Activations::LINEAR).cost(&pt).unwrap();
        let proj = wt.matrix() * wt.matrix().transpose();
        let oracle = (&x - proj * &x).norm_squared();
        assert!((f - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn linear_decoder_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = randn(&mut rng, 5, 7);
        let pt = ProductPoint::new(
            randn(&mut rng, 5, 2),
            StiefelPoint::from_qr(&randn(&mut rng, 5, 2)).unwrap(),
        )
        .unwrap();
        let (_, _, gwt) = ReconstructionCost::new(&x, Activations::LINEAR)
            .cost_and_grad(&pt)
            .unwrap();
        let g = pt.w.transpose() * &x;
        let closed = (pt.w_tilde.matrix() * &g - &x) * 2.0 * g.transpose();
        assert!((gwt - &closed).norm() <= 1e-12 * closed.norm());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = randn(&mut rng, 7, 5);
        let pt = ProductPoint::new(
            randn(&mut rng, 7, 2) * 0.5,
            StiefelPoint::from_qr(&randn(&mut rng, 7, 2)).unwrap(),
        )
        .unwrap();
        let act = Activations {
            encoder: Activation::Tanh,
            decoder: Activation::Sigmoid,
        };
        let obj = ReconstructionCost::new(&x, act);
        let (_, gw, gwt) = obj.cost_and_grad(&pt).unwrap();
        let h = 1e-6;
        // Perturb each entry of W and of the (unconstrained) decoder matrix.
        for i in 0..7 {
            for j in 0..2 {
                let mut a = pt.clone();
                let mut b = pt.clone();
                a.w[(i, j)] += h;
                b.w[(i, j)] -= h;
                let fd = (obj.cost(&a).unwrap() - obj.cost(&b).unwrap()) / (2.0 * h);
                assert!((fd - gw[(i, j)]).abs() <= 1e-5 * gw[(i, j)].abs().max(1.0));

                let mut wa = pt.w_tilde.matrix().clone();
                let mut wb = wa.clone();
                wa[(i, j)] += h;
                wb[(i, j)] -= h;
                // Bypass the Stiefel check: the cost is defined on all of R^{N×p}.
                let fa = unconstrained_cost(&x, &pt.w, &wa, act);
                let fb = unconstrained_cost(&x, &pt.w, &wb, act);
                let fd = (fa - fb) / (2.0 * h);
                assert!((fd - gwt[(i, j)]).abs() <= 1e-5 * gwt[(i, j)].abs().max(1.0));
            }
        }
    }

    fn unconstrained_cost(x: &DMatrix<f64>, w: &DMatrix<f64>, wt: &DMatrix<f64>, act: Activations) -> f64 {
        let g = (w.transpose() * x).map(|v| act.encoder.apply(v));
        let r = (wt * g).map(|v| act.decoder.apply(v));
        (r - x).norm_squared()
    }

    #[test]
    fn armijo_on_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let target = randn(&mut rng, 4, 2);
        let obj = Quadratic(target);
        let pt = initial_point(4, 2, 9).unwrap();
        let (f0, gw, gwt) = obj.cost_and_grad(&pt).unwrap();
        let grad = riemannian_grad(&pt, &gw, &gwt).unwrap();
        let dir = grad.scale(-1.0);
        let cfg = CgConfig::default();
        let t = line_search(&obj, &pt, &dir, &cfg).unwrap();
        assert!(t > 0.0);
        let moved = retract_product(&pt, &dir, t).unwrap();
        let slope = frob_inner(&grad.dw, &dir.dw);
        assert!(obj.cost(&moved).unwrap() <= f0 + cfg.armijo_c1 * t * slope);
        // t = 1 overshoots (f doubles back to the same value); 0.5 is exact.
        assert_eq!(t, 0.5);
    }

    #[test]
    fn line_search_rejects_zero_gradient() {
        let pt = initial_point(4, 2, 1).unwrap();
        let obj = Quadratic(pt.w.clone());
        let dir = TangentPair::zeros(4, 2);
        assert!(matches!(
            line_search(&obj, &pt, &dir, &CgConfig::default()),
            Err(ScaError::NotDescent(_))
        ));
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let pt = initial_point(5, 2, 3).unwrap();
        let obj = Quadratic(pt.w.clone());
        let (out, trace) = cg_optimize(&obj, pt.clone(), &CgConfig::default()).unwrap();
        assert_eq!(trace.iterations, 0);
        assert_eq!(trace.stop_reason, StopReason::GradientTolerance);
        assert_eq!(out, pt);
    }

    #[test]
    fn cg_descends_and_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = randn(&mut rng, 13, 40);
        let obj = ReconstructionCost::new(&x, Activations::default());
        let cfg = CgConfig {
            max_iters: 150,
            ..Default::default()
        };
        let (pt, trace) = cg_optimize(&obj, initial_point(13, 3, 1).unwrap(), &cfg).unwrap();
        for w in trace.cost_per_iter.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(orthonormality_residual(pt.w_tilde.matrix()) <= 1e-8);
        assert!(trace.final_cost() < trace.cost_per_iter[0]);
    }

    #[test]
    fn trace_csv_format() {
        let trace = CgTrace {
            cost_per_iter: vec![2.0, 1.5],
            grad_norm_per_iter: vec![1.0, 0.25],
            iterations: 1,
            restarts: 0,
            wall_time: 0.0,
            stop_reason: StopReason::MaxIterations,
        };
        let mut buf = Vec::new();
        trace.write_csv_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,cost,grad_norm\n0,2.0,1.0\n1,1.5,0.25\n");
    }
}
