mod common;

use cartan_core::fd::partial;
use cartan_core::geometry::{cartan_tensor, connection, connection_residuals, curvature, fundamental_tensor, Depth};
use cartan_core::metric::TMPoint;
use cartan_core::zoo::{build, builtin};
use common::{rel_dev, DiagonalExp};
use proptest::prelude::*;

#[test]
fn diagonal_metrics_reduce_to_levi_civita() {
    for seed in 0..3 {
        let d = DiagonalExp::random(100 + seed);
        let m = d.metric();
        for p in m.sample_points(2, seed) {
            let b = curvature(&m, &p, Depth::Base).unwrap();
            let lc = d.levi_civita(&p.x);
            assert!(rel_dev(b.g.data(), &lc.g) < 1e-12);
            assert!(rel_dev(b.gamma.data(), &lc.gamma) < 1e-10);
            assert!(rel_dev(b.curvature.data(), &lc.riemann) < 1e-8);
            assert!(rel_dev(b.ric.data(), &lc.ric) < 1e-8);
            assert!((b.scalar_curvature - lc.r).abs() < 1e-8 * lc.r.abs().max(1.0));
        }
    }
}

#[test]
fn randers_metric_tensor_matches_finite_differences() {
    let m = build(&builtin("randers", 3, 1.0).unwrap()).unwrap();
    let p = TMPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]);
    let g = fundamental_tensor(&m, &p).unwrap();
    let e = |q: &TMPoint| Ok(vec![m.energy_value(&q.x, &q.y).unwrap()]);
    for i in 0..3 {
        for j in 0..3 {
            let dj = |q: &TMPoint| partial(&e, q, 3 + j, 1e-3, 3);
            let want = 0.5 * partial(&dj, &p, 3 + i, 1e-3, 3).unwrap()[0];
            assert!((g.get(&[i, j]) - want).abs() < 1e-6, "g[{i}][{j}]");
        }
    }
}

#[test]
fn randers_cartan_tensor_annihilates_y() {
    let m = build(&builtin("randers", 3, 1.0).unwrap()).unwrap();
    for p in m.sample_points(4, 9) {
        let c = cartan_tensor(&m, &p).unwrap();
        assert!(c.norm() > 1e-3);
        for j in 0..3 {
            for k in 0..3 {
                let s: f64 = (0..3).map(|i| c.get(&[i, j, k]) * p.y[i]).sum();
                assert!(s.abs() < 1e-10);
            }
        }
    }
}

#[test]
fn connection_axioms_hold() {
    for name in ["randers", "conformal", "riemannian_diag"] {
        let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap();
        for p in m.sample_points(2, 4) {
            let r = connection_residuals(&m, &p).unwrap();
            assert!(r.symmetry < 1e-12 && r.deflection < 1e-10 && r.metricity < 1e-10, "{name}: {r:?}");
        }
    }
}

#[test]
fn sphere_curvature_is_constant() {
    let m = build(&builtin("constant_curvature", 3, 1.0).unwrap()).unwrap();
    for p in m.sample_points(3, 1) {
        let b = curvature(&m, &p, Depth::First).unwrap();
        assert!((b.scalar_curvature - 6.0).abs() < 1e-9);
        assert!(b.cten.norm() < 1e-8 * b.curvature.norm());
        for j in 0..3 {
            for k in 0..3 {
                assert!((b.ric.get(&[j, k]) - 2.0 * b.g.get(&[j, k])).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn homogeneity_degrees(lambda in 0.3f64..3.0, seed in 0u64..1000) {
        let m = build(&builtin("randers", 3, 1.0).unwrap()).unwrap();
        let p = m.sample_points(1, seed).remove(0);
        let q = p.with_fiber_scaled(lambda);
        let (a, b) = (connection(&m, &p).unwrap(), connection(&m, &q).unwrap());
        let scaled = |v: &[f64], k: i32| v.iter().map(|x| x * lambda.powi(k)).collect::<Vec<_>>();
        prop_assert!(rel_dev(&scaled(&a.spray, 2), &b.spray) < 1e-10);
        prop_assert!(rel_dev(&scaled(a.nonlinear.data(), 1), b.nonlinear.data()) < 1e-10);
        prop_assert!(rel_dev(a.gamma.data(), b.gamma.data()) < 1e-10);
        let (ga, gb) = (fundamental_tensor(&m, &p).unwrap(), fundamental_tensor(&m, &q).unwrap());
        prop_assert!(rel_dev(ga.data(), gb.data()) < 1e-12);
    }

    #[test]
    fn metric_tensor_is_positive_definite(seed in 0u64..1000) {
        let m = build(&builtin("randers", 4, 1.0).unwrap()).unwrap();
        let p = m.sample_points(1, seed).remove(0);
        let g = fundamental_tensor(&m, &p).unwrap();
        let mat = nalgebra::DMatrix::from_row_slice(4, 4, g.data());
        prop_assert!((&mat - mat.transpose()).norm() < 1e-14);
        prop_assert!(mat.symmetric_eigen().eigenvalues.iter().all(|&e| e > 0.0));
    }
}
