mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;
use sca_core::data::{expand_sample, expanded_dim};
use sca_core::manifold::{inner, project_tangent, retract, transport};
use sca_core::monitor::{inverse_feature_covariance, t2_columns};
use sca_core::*;

fn stiefel_case() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..10).prop_flat_map(|n| (Just(n), 1..=n, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retraction_stays_on_manifold((n, p, seed) in stiefel_case(), t in -3.0f64..3.0) {
        let mut r = rng(seed);
        let base = StiefelPoint::new(random_stiefel(&mut r, n, p)).unwrap();
        let h = project_tangent(&base, &randn(&mut r, n, p)).unwrap();
        let out = retract(&base, &h, t).unwrap();
        prop_assert!(orth_residual(out.matrix()) <= 1e-10);
    }

    #[test]
    fn projection_is_tangent_and_idempotent((n, p, seed) in stiefel_case()) {
        let mut r = rng(seed);
        let base = StiefelPoint::new(random_stiefel(&mut r, n, p)).unwrap();
        let z = randn(&mut r, n, p);
        let pz = project_tangent(&base, &z).unwrap();
        let w = base.matrix();
        let s = w.transpose() * &pz;
        prop_assert!((&s + s.transpose()).norm() <= 1e-10 * z.norm().max(1.0));
        let ppz = project_tangent(&base, &pz).unwrap();
        prop_assert!((ppz - &pz).norm() <= 1e-10 * z.norm().max(1.0));
    }

    #[test]
    fn transport_lands_in_tangent_space((n, p, seed) in stiefel_case(), t in 0.01f64..2.0) {
        let mut r = rng(seed);
        let base = StiefelPoint::new(random_stiefel(&mut r, n, p)).unwrap();
        let h = project_tangent(&base, &randn(&mut r, n, p)).unwrap();
        let next = retract(&base, &h, t).unwrap();
        let v = TangentPair::new(randn(&mut r, n, p), h.clone()).unwrap();
        let moved = transport(&next, &v).unwrap();
        prop_assert!(next.tangency_residual(&moved.dh) <= 1e-10 * h.norm().max(1.0));
        prop_assert_eq!(&moved.dw, &v.dw);
        // The product metric is symmetric and positive.
        prop_assert!((inner(&v, &moved).unwrap() - inner(&moved, &v).unwrap()).abs() <= 1e-12 * v.norm().powi(2).max(1.0));
        prop_assert!(inner(&v, &v).unwrap() >= 0.0);
    }

    #[test]
    fn t2_is_rotation_invariant(p in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = randn(&mut r, p, 40);
        let q = random_stiefel(&mut r, p, p);
        let gr = &q * &g;
        let a = t2_columns(&inverse_feature_covariance(&g).unwrap(), &g);
        let b = t2_columns(&inverse_feature_covariance(&gr).unwrap(), &gr);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn limit_is_monotone_in_zeta(seed in any::<u64>(), z1 in 0.005f64..0.25, dz in 0.0f64..0.25) {
        let mut r = rng(seed);
        let samples: Vec<f64> = randn(&mut r, 1, 200).iter().map(|v| v * v).collect();
        let lo = control_limit(&samples, z1, LimitRule::Coverage).unwrap().tau;
        let hi = control_limit(&samples, (z1 + dz).min(0.5), LimitRule::Coverage).unwrap().tau;
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn scaling_normalizes_and_inverts(n in 1usize..6, m in 3usize..40, seed in any::<u64>()) {
        let mut r = rng(seed);
        let raw = randn(&mut r, n, m) * 3.0 + DMatrix::from_element(n, m, 5.0);
        let x = DataMatrix::new(raw.clone()).unwrap();
        let s = fit_scaler(&x).unwrap();
        let z = apply_scaler(&s, &x).unwrap();
        let oracle = zscore(&raw);
        prop_assert!((z.values() - &oracle).amax() <= 1e-10);
        let back = s.invert(&z).unwrap();
        prop_assert!((back.values() - &raw).amax() <= 1e-9);
    }

    #[test]
    fn expansion_layout(x in prop::collection::vec(-10.0f64..10.0, 1..7)) {
        let n = x.len();
        let e = expand_sample(&x);
        prop_assert_eq!(e.len(), expanded_dim(n));
        prop_assert_eq!(e[0], 1.0);
        for j in 0..n {
            prop_assert_eq!(e[1 + j], x[j]);
            for k in 0..n {
                prop_assert_eq!(e[1 + n + j * n + k], x[j] * x[k]);
            }
        }
    }

    #[test]
    fn t2_matches_linear_solve(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = randn(&mut r, 3, 3);
        let sigma = &a * a.transpose() + DMatrix::identity(3, 3) * 0.5;
        let g = DVector::from_column_slice(randn(&mut r, 3, 1).as_slice());
        let inv = sigma.clone().try_inverse().unwrap();
        let y = sigma.lu().solve(&g).unwrap();
        let oracle = g.dot(&y);
        prop_assert!((monitor::t2(&inv, &g) - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }
}
