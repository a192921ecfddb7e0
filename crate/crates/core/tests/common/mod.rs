//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's linear algebra.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Eigenvalues descending, eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        let scale: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// Largest principal angle between the column spans of two matrices with
/// orthonormal columns, via `σ_max((I − AAᵀ)B)`.
pub fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let resid = b - a * (a.transpose() * b);
    let (vals, _) = jacobi_eigen(&(resid.transpose() * &resid));
    vals[0].max(0.0).sqrt().min(1.0).asin()
}

pub fn orth_residual(w: &DMatrix<f64>) -> f64 {
    (w.transpose() * w - DMatrix::identity(w.ncols(), w.ncols())).norm()
}

/// Gram–Schmidt on the columns of a random matrix.
pub fn random_stiefel(rng: &mut impl Rng, n: usize, p: usize) -> DMatrix<f64> {
    let mut q = randn(rng, n, p);
    for j in 0..p {
        for _ in 0..2 {
            for k in 0..j {
                let d = q.column(k).dot(&q.column(j));
                let ck = q.column(k).into_owned();
                let mut cj = q.column_mut(j);
                cj -= ck * d;
            }
        }
        let nrm = q.column(j).norm();
        q.column_mut(j).unscale_mut(nrm);
    }
    q
}

/// Rows are variables; sample mean and sample std (divisor m − 1).
pub fn zscore(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.ncols() as f64;
    let mut z = x.clone();
    for mut row in z.row_iter_mut() {
        let mu = row.iter().sum::<f64>() / m;
        let sd = (row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let sd = if sd < 1e-12 { 1.0 } else { sd };
        for v in row.iter_mut() {
            *v = (*v - mu) / sd;
        }
    }
    z
}

pub fn covariance(z: &DMatrix<f64>) -> DMatrix<f64> {
    let m = z.ncols() as f64;
    let mut c = z.clone();
    for mut row in c.row_iter_mut() {
        let mu = row.iter().sum::<f64>() / m;
        for v in row.iter_mut() {
            *v -= mu;
        }
    }
    &c * c.transpose() / (m - 1.0)
}

pub fn act(name: &str, v: f64) -> f64 {
    match name {
        "identity" => v,
        "tanh" => v.tanh(),
        "sigmoid" => 1.0 / (1.0 + (-v).exp()),
        _ => unreachable!(),
    }
}

/// `‖X − σ̃(W̃ σ(WᵀX))‖²_F`, written out element by element.
pub fn sca_cost(x: &DMatrix<f64>, w: &DMatrix<f64>, wt: &DMatrix<f64>, enc: &str, dec: &str) -> f64 {
    let (big_n, m) = x.shape();
    let p = w.ncols();
    let mut total = 0.0;
    for s in 0..m {
        let g: Vec<f64> = (0..p)
            .map(|k| act(enc, (0..big_n).map(|i| w[(i, k)] * x[(i, s)]).sum()))
            .collect();
        for i in 0..big_n {
            let y: f64 = (0..p).map(|k| wt[(i, k)] * g[k]).sum();
            total += (x[(i, s)] - act(dec, y)).powi(2);
        }
    }
    total
}

/// Five-point central differences of `f` with respect to every entry of `at`.
pub fn fd_grad(at: &DMatrix<f64>, step: f64, mut f: impl FnMut(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(at.nrows(), at.ncols());
    let mut probe = at.clone();
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let orig = probe[(i, j)];
            let mut eval = |d: f64| {
                probe[(i, j)] = orig + d;
                f(&probe)
            };
            let (p2, p1, m1, m2) = (eval(2.0 * step), eval(step), eval(-step), eval(-2.0 * step));
            probe[(i, j)] = orig;
            g[(i, j)] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step);
        }
    }
    g
}

pub fn rel_err(approx: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (approx - exact).norm() / exact.norm().max(1e-12)
}

/// Correlated 52-variable data resembling a chemical process record:
/// a handful of slow latent drivers, mixed linearly, with a few quadratic
/// couplings and sensor noise. Rows are variables.
pub fn process_like(seed: u64, m: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let latent_dim = 12;
    let mix = randn(&mut r, 52, latent_dim);
    let mut latent = randn(&mut r, latent_dim, m);
    for i in 0..latent_dim {
        for s in 1..m {
            latent[(i, s)] = 0.8 * latent[(i, s - 1)] + 0.6 * latent[(i, s)];
        }
    }
    let mut x = &mix * &latent + randn(&mut r, 52, m) * 0.3;
    for s in 0..m {
        for j in 0..8 {
            x[(40 + j, s)] += 0.3 * latent[(j, s)] * latent[(j + 1, s)];
        }
    }
    x
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
