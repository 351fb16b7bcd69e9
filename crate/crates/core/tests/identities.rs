use cartan_core::geometry::{curvature, Depth};
use cartan_core::identities::{contracted_identity, curvature_identities, merge, recurrence_identities};
use cartan_core::recurrence::{classify, compose_ricci_operator, Tolerances};
use cartan_core::zoo::{build, builtin};

#[test]
fn riemannian_metrics_satisfy_classical_identities() {
    for name in ["riemannian_diag", "constant_curvature", "conformal", "recurrent_product"] {
        let m = build(&builtin(name, 3, 1.0).unwrap()).unwrap();
        for p in m.sample_points(3, 8) {
            let b = curvature(&m, &p, Depth::Second).unwrap();
            for (id, v) in curvature_identities(&b, 1e-9).unwrap() {
                assert!(v.residual < 1e-8, "{name} {id}: {}", v.residual);
            }
        }
    }
}

#[test]
fn randers_is_not_integrable() {
    let m = build(&builtin("randers", 3, 1.0).unwrap()).unwrap();
    let p = &m.sample_points(1, 8)[0];
    let set = curvature_identities(&curvature(&m, p, Depth::Second).unwrap(), 1e-9).unwrap();
    assert!(set.values().all(|v| !v.applicable));
    assert!(set["first_bianchi"].guard_values["rhat_norm"] > 1e-6);
}

#[test]
fn recurrent_consequences_vanish_on_recurrent_product() {
    let tol = Tolerances::default();
    let m = build(&builtin("recurrent_product", 3, 1.0).unwrap()).unwrap();
    let c = classify(&m, &m.sample_points(3, 2), &tol).unwrap();
    let sets: Vec<_> = c.analyses.iter().map(|a| recurrence_identities(a, &c.report).unwrap()).collect();
    let merged = merge(&sets);
    for id in ["recurrent_cyclic_form", "recurrent_closed_form", "recurrent_curvature_action", "second_order_curvature_action"] {
        assert!(merged[id].residual < 1e-7, "{id}: {}", merged[id].residual);
    }
}

#[test]
fn synthetic_forms_satisfy_contracted_identity() {
    // Constant scalar curvature, non-Einstein: sphere factor times a line.
    let m = build(&builtin("symmetric_product", 4, 0.7).unwrap()).unwrap();
    for p in m.sample_points(3, 4) {
        let b = curvature(&m, &p, Depth::First).unwrap();
        let n = b.dim();
        let nf = n as f64;
        let a: Vec<f64> = (0..n).map(|i| 0.3 - 0.1 * i as f64).collect();
        let ar = compose_ricci_operator(&b, &a);
        let r = b.scalar_curvature;
        let bf: Vec<f64> = (0..n).map(|i| (2.0 * nf * ar[i] - 2.0 * r * a[i]) / (nf * (nf - 1.0) * (nf - 2.0))).collect();
        let res = contracted_identity(&b.g_inv, &b.ric, r, b.nabla_scalar.as_ref().unwrap(), &a, &bf);
        assert!(res < 1e-10, "{res}");
        let wrong: Vec<f64> = bf.iter().map(|v| v * 1.5).collect();
        assert!(contracted_identity(&b.g_inv, &b.ric, r, b.nabla_scalar.as_ref().unwrap(), &a, &wrong) > 1e-3);
    }
}
