//! Curvature identities and consequences of recurrence, evaluated as residuals.
//!
//! Every identity is always computed. Hypothesis-gated ones carry
//! `applicable = false` when their hypothesis fails at the point, most often
//! horizontal integrability (`R̂ = 0`), which non-flat Riemannian metrics never
//! satisfy even though the classical identities still hold for them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geometry::{curvature_action, lower_curvature, CurvatureBundle, GeometryError, Slot};
use crate::recurrence::{
    compose_ricci_operator, differentiate_forms, ConditionId, PointAnalysis, RecurrenceReport, Verdict, EPS_ABS,
};
use crate::tensor::{frobenius, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    /// Defect norm divided by `scale` (floored at `1e-14`).
    pub residual: f64,
    pub scale: f64,
    pub applicable: bool,
    pub guard_values: BTreeMap<String, f64>,
}

pub type IdentityResidualSet = BTreeMap<String, IdentityResidual>;

/// `‖R̂‖` at or below which a point counts as horizontally integrable.
pub fn integrability_threshold(n: usize, eps_form: f64) -> f64 {
    eps_form * ((n * n * n) as f64).sqrt()
}

fn entry(defect: f64, scale: f64, applicable: bool, guards: &[(&str, f64)]) -> IdentityResidual {
    IdentityResidual {
        residual: defect / scale.max(EPS_ABS),
        scale,
        applicable,
        guard_values: guards.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Three-pair cyclic sum `(R(U,V)ω)(W,X,Y,Z) + (R(W,X)ω)(Y,Z,U,V) + (R(Y,Z)ω)(U,V,W,X)`
/// for a rank-4 covariant `ω`.
pub fn walker_sum(r: &Tensor<f64>, omega: &Tensor<f64>) -> Result<Tensor<f64>, GeometryError> {
    let act = curvature_action(r, omega)?;
    let n = r.dim();
    Ok(Tensor::from_fn(n, 6, |i| {
        act.get(i) + act.get(&[i[2], i[3], i[4], i[5], i[0], i[1]]) + act.get(&[i[4], i[5], i[0], i[1], i[2], i[3]])
    }))
}

/// Probe one-form `ω_j = 1 + x^{j+1} + (x^j)²/2` (indices mod n), degree 0 in y.
fn probe_form(bundle: &CurvatureBundle) -> Result<Tensor<crate::jet::Jet>, GeometryError> {
    let frame = &bundle.jets.frame;
    let n = frame.dim();
    let xs = (0..n).map(|k| frame.coordinate(k)).collect::<Result<Vec<_>, _>>()?;
    Ok(Tensor::from_fn(n, 1, |j| {
        let j = j[0];
        let quad = (&xs[j] * &xs[j]).scale(0.5);
        (&xs[(j + 1) % n] + &quad).add_scalar(1.0)
    }))
}

/// Identities that hold for the curvature of any horizontally integrable metric.
pub fn curvature_identities(bundle: &CurvatureBundle, eps_form: f64) -> Result<IdentityResidualSet, GeometryError> {
    let n = bundle.dim();
    let r = &bundle.curvature;
    let rhat = bundle.rhat.norm();
    let integrable = rhat <= integrability_threshold(n, eps_form);
    let guards = [("rhat_norm", rhat)];
    let mut set = IdentityResidualSet::new();

    let first = Tensor::from_fn(n, 4, |i| {
        let (a, j, k, l) = (i[0], i[1], i[2], i[3]);
        r.get(&[a, j, k, l]) + r.get(&[a, k, l, j]) + r.get(&[a, l, j, k])
    });
    set.insert("first_bianchi".into(), entry(first.norm(), r.norm(), integrable, &guards));

    let lowered = lower_curvature(r, &bundle.g);
    let pair = Tensor::from_fn(n, 4, |i| lowered.get(i) - lowered.get(&[i[2], i[3], i[0], i[1]]));
    set.insert("pair_symmetry".into(), entry(pair.norm(), lowered.norm(), integrable, &guards));

    if let Some(nr) = &bundle.nabla_curvature {
        let cyc = Tensor::from_fn(n, 5, |i| {
            let (m, a, j, k, l) = (i[0], i[1], i[2], i[3], i[4]);
            nr.get(&[m, a, j, k, l]) + nr.get(&[k, a, j, l, m]) + nr.get(&[l, a, j, m, k])
        });
        set.insert("second_bianchi".into(), entry(cyc.norm(), nr.norm().max(r.norm()), integrable, &guards));
    }

    let ric = &bundle.ric;
    let asym = Tensor::from_fn(n, 2, |i| ric.get(i) - ric.get(&[i[1], i[0]]));
    set.insert("ricci_symmetry".into(), entry(asym.norm(), ric.norm(), integrable, &guards));

    let walker = walker_sum(r, &lowered)?;
    set.insert("walker_curvature".into(), entry(walker.norm(), r.norm() * lowered.norm(), integrable, &guards));
    let c_lowered = lower_curvature(&bundle.cten, &bundle.g);
    let walker_c = walker_sum(r, &c_lowered)?;
    set.insert("walker_concircular".into(), entry(walker_c.norm(), r.norm() * c_lowered.norm().max(lowered.norm()), integrable, &guards));

    if bundle.nabla2_curvature.is_some() {
        let frame = &bundle.jets.frame;
        let omega = probe_form(bundle)?;
        let first = frame.covariant(&omega, &[Slot::Down])?;
        let second = frame.covariant(&first, &[Slot::Down, Slot::Down])?.values();
        let w = omega.values();
        let defect = Tensor::from_fn(n, 3, |i| {
            let (x, y, z) = (i[0], i[1], i[2]);
            second.get(&[y, x, z]) - second.get(&[x, y, z]) + (0..n).map(|a| w.get(&[a]) * r.get(&[a, z, x, y])).sum::<f64>()
        });
        let scale = second.norm().max(r.norm() * w.norm());
        set.insert("ricci_identity".into(), entry(defect.norm(), scale, integrable, &guards));
    }
    Ok(set)
}

/// `2rA - 2n A∘Ric_o + n(n-1)(n-2)B + (n-2)∇r`, relative to the largest term
/// (floored at `max(|r|, 1)`).
pub fn contracted_identity(
    g_inv: &Tensor<f64>,
    ric: &Tensor<f64>,
    r: f64,
    nabla_r: &[f64],
    a: &[f64],
    b: &[f64],
) -> f64 {
    let n = g_inv.dim();
    let nf = n as f64;
    let a_ric: Vec<f64> = (0..n)
        .map(|j| (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| a[i] * g_inv.get(&[i, k]) * ric.get(&[k, j])).sum())
        .collect();
    let t1: Vec<f64> = a.iter().map(|v| 2.0 * r * v).collect();
    let t2: Vec<f64> = a_ric.iter().map(|v| -2.0 * nf * v).collect();
    let t3: Vec<f64> = b.iter().map(|v| nf * (nf - 1.0) * (nf - 2.0) * v).collect();
    let t4: Vec<f64> = nabla_r.iter().map(|v| (nf - 2.0) * v).collect();
    let total: Vec<f64> = (0..n).map(|m| t1[m] + t2[m] + t3[m] + t4[m]).collect();
    let scale = [&t1, &t2, &t3, &t4].iter().map(|t| frobenius(t)).fold(r.abs().max(1.0), f64::max);
    frobenius(&total) / scale
}

/// [`contracted_identity`] with `Ric`, `r` and `∇r` taken from a bundle.
pub fn contracted_identity_at(bundle: &CurvatureBundle, a: &[f64], b: &[f64]) -> Result<f64, GeometryError> {
    let nabla_r = bundle
        .nabla_scalar
        .as_ref()
        .ok_or_else(|| GeometryError::Shape("scalar curvature gradient not computed".into()))?;
    Ok(contracted_identity(&bundle.g_inv, &bundle.ric, bundle.scalar_curvature, nabla_r, a, b))
}

fn antisym(t: &Tensor<f64>) -> Tensor<f64> {
    Tensor::from_fn(t.dim(), 2, |i| t.get(i) - t.get(&[i[1], i[0]]))
}

/// `R(X,Y)ω + c(X,Y)ω + e(X,Y)ω₂` for two-form coefficients `c`, `e` in `[x][y]` storage.
fn action_defect(
    r: &Tensor<f64>,
    omega: &Tensor<f64>,
    c: &Tensor<f64>,
    extra: Option<(&Tensor<f64>, &Tensor<f64>)>,
) -> Result<Tensor<f64>, GeometryError> {
    let act = curvature_action(r, omega)?;
    let n = r.dim();
    Ok(Tensor::from_fn(n, 6, |i| {
        let (x, y, rest) = (i[0], i[1], &i[2..]);
        let mut v = act.get(i) + c.get(&[x, y]) * omega.get(rest);
        if let Some((e, w2)) = extra {
            v += e.get(&[x, y]) * w2.get(rest);
        }
        v
    }))
}

/// Consequences of the recurrence conditions at one point, gated on the
/// aggregated verdicts of `report`.
pub fn recurrence_identities(analysis: &PointAnalysis, report: &RecurrenceReport) -> Result<IdentityResidualSet, GeometryError> {
    let b = &analysis.bundle;
    let n = b.dim();
    let eps = &report.tolerances;
    let rhat = b.rhat.norm();
    let integrable = rhat <= integrability_threshold(n, eps.eps_form);
    let holds = |id: ConditionId| report.verdict(id) == Verdict::Holds;
    let lowered = lower_curvature(&b.curvature, &b.g);
    let c_lowered = lower_curvature(&b.cten, &b.g);
    let g_lowered = lower_curvature(&b.gten, &b.g);
    let r_scale = b.curvature.norm() * lowered.norm();
    let mut set = IdentityResidualSet::new();

    let f = differentiate_forms(b, &analysis.fit(ConditionId::F).fit.forms)?;
    let cyc = Tensor::from_fn(n, 5, |i| {
        let (m, a, j, k, l) = (i[0], i[1], i[2], i[3], i[4]);
        let rr = &b.curvature;
        f.a[m] * rr.get(&[a, j, k, l]) + f.a[k] * rr.get(&[a, j, l, m]) + f.a[l] * rr.get(&[a, j, m, k])
    });
    let guards = [("rhat_norm", rhat), ("form_norm", frobenius(&f.a))];
    set.insert(
        "recurrent_cyclic_form".into(),
        entry(cyc.norm(), frobenius(&f.a) * b.curvature.norm(), holds(ConditionId::F) && integrable, &guards),
    );
    let dbar = f.dbar_a();
    set.insert(
        "recurrent_closed_form".into(),
        entry(dbar.norm(), f.nabla_a.norm().max(frobenius(&f.a).powi(2)), holds(ConditionId::F) && integrable, &guards),
    );
    let defect = action_defect(&b.curvature, &lowered, &dbar, None)?;
    set.insert(
        "recurrent_curvature_action".into(),
        entry(defect.norm(), r_scale, holds(ConditionId::F) && integrable, &[("rhat_norm", rhat), ("dbar_a", dbar.norm())]),
    );

    let alpha_forms = &analysis.fit(ConditionId::F2).fit.forms[0];
    let alpha = Tensor::from_vec(n, 2, alpha_forms.iter().map(|j| j.value()).collect());
    let defect = action_defect(&b.curvature, &lowered, &antisym(&alpha), None)?;
    set.insert(
        "second_order_curvature_action".into(),
        entry(defect.norm(), r_scale, holds(ConditionId::F2) && integrable, &[("rhat_norm", rhat)]),
    );

    let cf = differentiate_forms(b, &analysis.fit(ConditionId::CF).fit.forms)?;
    let cdbar = cf.dbar_a();
    set.insert(
        "concircular_closed_form".into(),
        entry(cdbar.norm(), cf.nabla_a.norm().max(frobenius(&cf.a).powi(2)), holds(ConditionId::CF) && integrable, &[("rhat_norm", rhat)]),
    );
    let defect = action_defect(&b.curvature, &c_lowered, &cdbar, None)?;
    set.insert(
        "concircular_curvature_action".into(),
        entry(
            defect.norm(),
            b.curvature.norm() * c_lowered.norm().max(lowered.norm()),
            holds(ConditionId::CF) && integrable,
            &[("rhat_norm", rhat), ("dbar_a", cdbar.norm())],
        ),
    );

    let gf = differentiate_forms(b, &analysis.fit(ConditionId::GF).fit.forms)?;
    let gdbar = gf.dbar_a();
    let wedge = gf.dbar_b_plus_wedge().expect("affine fit has two forms");
    let defect = action_defect(&b.curvature, &lowered, &gdbar, Some((&wedge, &g_lowered)))?;
    set.insert(
        "generalized_curvature_action".into(),
        entry(
            defect.norm(),
            r_scale,
            holds(ConditionId::GF) && integrable,
            &[("rhat_norm", rhat), ("dbar_a", gdbar.norm()), ("dbar_b_plus_a_wedge_b", wedge.norm())],
        ),
    );

    let r = b.scalar_curvature;
    let nabla_r = b.nabla_scalar.as_ref().expect("first derivatives required");
    let constant_nonzero_r = r.abs() > eps.eps_form && frobenius(nabla_r) / r.abs().max(1.0) < eps.eps_fit;
    let g2 = &analysis.fit(ConditionId::G2F).fit.forms;
    let (alpha2, mu2) = (
        Tensor::from_vec(n, 2, g2[0].iter().map(|j| j.value()).collect()),
        Tensor::from_vec(n, 2, g2[1].iter().map(|j| j.value()).collect()),
    );
    let sym_defect = frobenius(&[antisym(&alpha2).norm(), antisym(&mu2).norm()]);
    let sym_scale = frobenius(&[alpha2.norm(), mu2.norm()]);
    set.insert(
        "second_order_forms_symmetry".into(),
        entry(sym_defect, sym_scale, holds(ConditionId::G2F) && constant_nonzero_r, &[("scalar_curvature", r)]),
    );

    let gcf = &analysis.fit(ConditionId::GCF).fit.forms;
    let (ga, gb): (Vec<f64>, Vec<f64>) = (gcf[0].iter().map(|j| j.value()).collect(), gcf[1].iter().map(|j| j.value()).collect());
    let a_ric = compose_ricci_operator(b, &ga);
    set.insert(
        "concircular_contracted_identity".into(),
        IdentityResidual {
            residual: contracted_identity_at(b, &ga, &gb)?,
            scale: 1.0,
            applicable: holds(ConditionId::GCF) && integrable,
            guard_values: [("rhat_norm".to_string(), rhat), ("a_ricci_norm".to_string(), frobenius(&a_ric))].into(),
        },
    );
    Ok(set)
}

/// Combines per-point sets: worst residual, applicable only if applicable everywhere,
/// guard values as their maximum magnitude.
pub fn merge(sets: &[IdentityResidualSet]) -> IdentityResidualSet {
    let mut out = IdentityResidualSet::new();
    for set in sets {
        for (id, v) in set {
            out.entry(id.clone())
                .and_modify(|acc: &mut IdentityResidual| {
                    acc.residual = acc.residual.max(v.residual);
                    acc.scale = acc.scale.max(v.scale);
                    acc.applicable &= v.applicable;
                    for (g, x) in &v.guard_values {
                        let e = acc.guard_values.entry(g.clone()).or_insert(0.0);
                        if x.abs() > e.abs() {
                            *e = *x;
                        }
                    }
                })
                .or_insert_with(|| v.clone());
        }
    }
    out
}
