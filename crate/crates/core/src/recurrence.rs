//! Least-squares fits of recurrence forms and verdicts for the fifteen
//! recurrence and symmetry conditions.
//!
//! A condition compares a derivative tensor `D` (`∇T` or `∇∇T`, rows indexed
//! by the derivative slot(s)) with a target `T` and optionally a companion `U`:
//! `D = A⊗T` or `D = A⊗T + B⊗U`. Forms are fitted row by row in whatever
//! scalar type the inputs carry, so jet inputs give jet-valued forms that can be
//! differentiated again.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, CurvatureBundle, Depth, GeometryError, Slot};
use crate::jet::{Jet, JetConfig};
use crate::metric::{FinslerMetric, TMPoint};
use crate::scalar::{dot, Scalar};
use crate::tensor::{frobenius, Tensor};

/// Floor for residual denominators.
pub const EPS_ABS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub eps_fit: f64,
    /// Multiplied by the square root of the target's component count.
    pub eps_deg: f64,
    pub eps_form: f64,
    pub eps_gram: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps_fit: 1e-7, eps_deg: 1e-10, eps_form: 1e-9, eps_gram: 1e-10 }
    }
}

impl Tolerances {
    /// `‖T‖` below which a target of `count` components is treated as zero.
    pub fn degeneracy_threshold(&self, count: usize) -> f64 {
        self.eps_deg * (count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DegenerateReason {
    /// The fitted form vanishes, e.g. a symmetric space tested for proper recurrence.
    ZeroForm,
    /// Target and companion are parallel, so the affine fit is not unique.
    SingularGram,
    /// The target tensor itself vanishes.
    ZeroTarget,
}

impl DegenerateReason {
    pub fn name(self) -> &'static str {
        match self {
            DegenerateReason::ZeroForm => "ZERO_FORM",
            DegenerateReason::SingularGram => "SINGULAR_GRAM",
            DegenerateReason::ZeroTarget => "ZERO_TARGET",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Holds,
    Fails,
    Degenerate(DegenerateReason),
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "HOLDS",
            Verdict::Fails => "FAILS",
            Verdict::Degenerate(_) => "DEGENERATE",
        }
    }

    pub fn reason(self) -> Option<DegenerateReason> {
        match self {
            Verdict::Degenerate(r) => Some(r),
            _ => None,
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Degenerate(r) => write!(f, "DEGENERATE({})", r.name()),
            v => f.write_str(v.name()),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

/// Combines per-point verdicts: unanimous verdicts pass through, all-degenerate
/// sets report the most severe reason, anything else is a failure.
pub fn aggregate(verdicts: &[Verdict]) -> Verdict {
    let Some(&first) = verdicts.first() else {
        return Verdict::Degenerate(DegenerateReason::ZeroTarget);
    };
    if verdicts.iter().all(|&v| v == first) {
        return first;
    }
    let reasons: Option<Vec<DegenerateReason>> = verdicts.iter().map(|v| v.reason()).collect();
    match reasons {
        Some(rs) => Verdict::Degenerate(rs.into_iter().max().unwrap()),
        None => Verdict::Fails,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Curvature,
    Ricci,
    Concircular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    /// `∇T = 0`
    Symmetric,
    /// `∇T = A⊗T`
    Recurrent,
    /// `∇∇T = α⊗T`
    SecondOrder,
    /// `∇T = A⊗T + B⊗U`
    Generalized,
    /// `∇∇T = α⊗T + μ⊗U`
    GeneralizedSecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionId {
    Sym,
    F,
    F2,
    GF,
    G2F,
    RSym,
    RF,
    RF2,
    GRF,
    G2RF,
    CSym,
    CF,
    CF2,
    GCF,
    G2CF,
}

impl Serialize for ConditionId {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(self.name())
    }
}

impl ConditionId {
    pub const ALL: [ConditionId; 15] = [
        ConditionId::Sym,
        ConditionId::F,
        ConditionId::F2,
        ConditionId::GF,
        ConditionId::G2F,
        ConditionId::RSym,
        ConditionId::RF,
        ConditionId::RF2,
        ConditionId::GRF,
        ConditionId::G2RF,
        ConditionId::CSym,
        ConditionId::CF,
        ConditionId::CF2,
        ConditionId::GCF,
        ConditionId::G2CF,
    ];

    pub fn name(self) -> &'static str {
        use ConditionId::*;
        match self {
            Sym => "SYM",
            F => "F",
            F2 => "2F",
            GF => "GF",
            G2F => "G2F",
            RSym => "RSYM",
            RF => "RF",
            RF2 => "2RF",
            GRF => "GRF",
            G2RF => "G2RF",
            CSym => "CSYM",
            CF => "CF",
            CF2 => "2CF",
            GCF => "GCF",
            G2CF => "G2CF",
        }
    }

    pub fn from_name(name: &str) -> Option<ConditionId> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn family(self) -> Family {
        match self.index() / 5 {
            0 => Family::Curvature,
            1 => Family::Ricci,
            _ => Family::Concircular,
        }
    }

    pub fn kind(self) -> Kind {
        match self.index() % 5 {
            0 => Kind::Symmetric,
            1 => Kind::Recurrent,
            2 => Kind::SecondOrder,
            3 => Kind::Generalized,
            _ => Kind::GeneralizedSecondOrder,
        }
    }

    /// Whether the fitted forms are one-forms (as opposed to two-forms or none).
    pub fn has_one_forms(self) -> bool {
        matches!(self.kind(), Kind::Recurrent | Kind::Generalized)
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<S> {
    /// One entry per fitted form (`[A]` or `[A, B]`), each indexed by derivative row.
    pub forms: Vec<Vec<S>>,
    pub residual: f64,
    pub target_norm: f64,
    pub derivative_norm: f64,
    /// `‖D‖ / ‖T‖ < ε_fit`: the target is parallel.
    pub symmetric: bool,
    pub verdict: Verdict,
}

fn values<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(Scalar::value).collect()
}

fn rows_norm<S: Scalar>(d: &[&[S]]) -> f64 {
    let all: Vec<f64> = d.iter().flat_map(|row| row.iter().map(Scalar::value)).collect();
    frobenius(&all)
}

/// `‖D - Σ_f form_f ⊗ target_f‖ / max(‖D‖, ε_abs)` on values.
fn relative_residual(d: &[Vec<f64>], terms: &[(&[f64], &[f64])], d_norm: f64) -> f64 {
    let mut diff = Vec::with_capacity(d.len() * d.first().map_or(0, Vec::len));
    for (m, row) in d.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            diff.push(v - terms.iter().map(|(form, target)| form[m] * target[k]).sum::<f64>());
        }
    }
    frobenius(&diff) / d_norm.max(EPS_ABS)
}

fn form_verdict(residual: f64, symmetric: bool, form_norms: &[f64], tol: &Tolerances) -> Verdict {
    if symmetric {
        Verdict::Degenerate(DegenerateReason::ZeroForm)
    } else if !(residual < tol.eps_fit) {
        Verdict::Fails
    } else if form_norms.iter().any(|&n| n <= tol.eps_form) {
        Verdict::Degenerate(DegenerateReason::ZeroForm)
    } else {
        Verdict::Holds
    }
}

/// Verdict for `∇T = 0`: the relative size `‖D‖ / ‖T‖` is the residual.
pub fn fit_symmetric<S: Scalar>(d: &[&[S]], t: &[S], tol: &Tolerances) -> FitResult<S> {
    let target_norm = frobenius(&values(t));
    let derivative_norm = rows_norm(d);
    if target_norm < tol.degeneracy_threshold(t.len()) {
        return FitResult {
            forms: vec![],
            residual: 0.0,
            target_norm,
            derivative_norm,
            symmetric: false,
            verdict: Verdict::Degenerate(DegenerateReason::ZeroTarget),
        };
    }
    let residual = derivative_norm / target_norm;
    let symmetric = residual < tol.eps_fit;
    FitResult {
        forms: vec![],
        residual,
        target_norm,
        derivative_norm,
        symmetric,
        verdict: if symmetric { Verdict::Holds } else { Verdict::Fails },
    }
}

/// Fits `D = A⊗T` row by row: `A_m = ⟨D_m, T⟩ / ⟨T, T⟩`.
pub fn fit_proportional<S: Scalar>(d: &[&[S]], t: &[S], tol: &Tolerances) -> FitResult<S> {
    let tv = values(t);
    let target_norm = frobenius(&tv);
    let derivative_norm = rows_norm(d);
    let zero = t[0].lift(0.0);
    if target_norm < tol.degeneracy_threshold(t.len()) {
        return FitResult {
            forms: vec![vec![zero; d.len()]],
            residual: 0.0,
            target_norm,
            derivative_norm,
            symmetric: false,
            verdict: Verdict::Degenerate(DegenerateReason::ZeroTarget),
        };
    }
    let tt = dot(t, t);
    let a: Vec<S> = d.iter().map(|row| dot(row, t).div(&tt).expect("nonzero target")).collect();
    let av = values(&a);
    let dv: Vec<Vec<f64>> = d.iter().map(|row| values(row)).collect();
    let residual = relative_residual(&dv, &[(&av, &tv)], derivative_norm);
    let symmetric = derivative_norm / target_norm < tol.eps_fit;
    let verdict = form_verdict(residual, symmetric, &[frobenius(&av)], tol);
    FitResult { forms: vec![a], residual, target_norm, derivative_norm, symmetric, verdict }
}

/// Condition number of the 2×2 Gram matrix `[[a, b], [b, c]]`.
pub fn gram_condition(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (hi, lo) = (mean + radius, mean - radius);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Fits `D = A⊗T + B⊗U` row by row through the 2×2 normal equations.
pub fn fit_affine<S: Scalar>(d: &[&[S]], t: &[S], u: &[S], tol: &Tolerances) -> FitResult<S> {
    assert_eq!(t.len(), u.len(), "target and companion must have the same component count");
    let tv = values(t);
    let uv = values(u);
    let target_norm = frobenius(&tv);
    let derivative_norm = rows_norm(d);
    let zero = t[0].lift(0.0);
    let degenerate = |reason| FitResult {
        forms: vec![vec![zero.clone(); d.len()], vec![zero.clone(); d.len()]],
        residual: 0.0,
        target_norm,
        derivative_norm,
        symmetric: false,
        verdict: Verdict::Degenerate(reason),
    };
    if target_norm < tol.degeneracy_threshold(t.len()) {
        return degenerate(DegenerateReason::ZeroTarget);
    }
    let dot_f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    if gram_condition(dot_f(&tv, &tv), dot_f(&tv, &uv), dot_f(&uv, &uv)) > 1.0 / tol.eps_gram {
        return degenerate(DegenerateReason::SingularGram);
    }
    let (tt, tu, uu) = (dot(t, t), dot(t, u), dot(u, u));
    let det = tt.mul(&uu).sub(&tu.mul(&tu));
    let mut a = Vec::with_capacity(d.len());
    let mut b = Vec::with_capacity(d.len());
    for row in d {
        let (dt, du) = (dot(row, t), dot(row, u));
        a.push(uu.mul(&dt).sub(&tu.mul(&du)).div(&det).expect("regular Gram matrix"));
        b.push(tt.mul(&du).sub(&tu.mul(&dt)).div(&det).expect("regular Gram matrix"));
    }
    let (av, bv) = (values(&a), values(&b));
    let dv: Vec<Vec<f64>> = d.iter().map(|row| values(row)).collect();
    let residual = relative_residual(&dv, &[(&av, &tv), (&bv, &uv)], derivative_norm);
    let symmetric = derivative_norm / target_norm < tol.eps_fit;
    let verdict = form_verdict(residual, symmetric, &[frobenius(&av), frobenius(&bv)], tol);
    FitResult { forms: vec![a, b], residual, target_norm, derivative_norm, symmetric, verdict }
}

/// Form-dependent side quantities at one point (Frobenius norms). Entries are
/// `None` when the condition has no such form or the fit was degenerate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FormSideValues {
    pub nabla_r_minus_ra: Option<f64>,
    pub nabla_a_plus_aa: Option<f64>,
    pub nabla_b_plus_ab: Option<f64>,
    pub b1: Option<f64>,
    pub dbar_a: Option<f64>,
    pub dbar_b_plus_a_wedge_b: Option<f64>,
}

/// Differentiated one-forms of a fit at one point, stored `[k][m]` with the
/// derivative index first.
#[derive(Debug, Clone)]
pub struct FormDerivatives {
    pub a: Vec<f64>,
    pub nabla_a: Tensor<f64>,
    pub b: Option<Vec<f64>>,
    pub nabla_b: Option<Tensor<f64>>,
}

impl FormDerivatives {
    /// `∇A + A⊗A`, the coefficient of `T` in `∇∇T` for a recurrent target.
    pub fn second_coefficient_a(&self) -> Tensor<f64> {
        let n = self.a.len();
        Tensor::from_fn(n, 2, |km| self.nabla_a.get(km) + self.a[km[0]] * self.a[km[1]])
    }

    /// `∇B + A⊗B` in derivative-first storage: `∇B[k][m] + B_k A_m`.
    pub fn second_coefficient_b(&self) -> Option<Tensor<f64>> {
        let (b, nb) = (self.b.as_ref()?, self.nabla_b.as_ref()?);
        Some(Tensor::from_fn(self.a.len(), 2, |km| nb.get(km) + b[km[0]] * self.a[km[1]]))
    }

    /// `d̄A(X, Y) = (∇A)(X, Y) - (∇A)(Y, X)`.
    pub fn dbar_a(&self) -> Tensor<f64> {
        antisymmetrize(&self.nabla_a)
    }

    /// Antisymmetric part of the `U`-coefficient of `∇∇T`; the quantity written
    /// `d̄B + A∧B`.
    pub fn dbar_b_plus_wedge(&self) -> Option<Tensor<f64>> {
        Some(antisymmetrize(&self.second_coefficient_b()?))
    }
}

fn antisymmetrize(t: &Tensor<f64>) -> Tensor<f64> {
    Tensor::from_fn(t.dim(), 2, |km| t.get(km) - t.get(&[km[1], km[0]]))
}

/// Horizontal covariant derivatives of jet-valued one-forms.
pub fn differentiate_forms(bundle: &CurvatureBundle, forms: &[Vec<Jet>]) -> Result<FormDerivatives, GeometryError> {
    let n = bundle.dim();
    let frame = &bundle.jets.frame;
    let diff = |f: &Vec<Jet>| -> Result<Tensor<f64>, GeometryError> {
        Ok(frame.covariant(&Tensor::from_vec(n, 1, f.clone()), &[Slot::Down])?.values())
    };
    let a = &forms[0];
    Ok(FormDerivatives {
        a: a.iter().map(Jet::value).collect(),
        nabla_a: diff(a)?,
        b: forms.get(1).map(|b| b.iter().map(Jet::value).collect()),
        nabla_b: forms.get(1).map(diff).transpose()?,
    })
}

/// `B₁ = B - rA/(n(n-1)) + ∇r/(n(n-1))`.
pub fn b1_form(bundle: &CurvatureBundle, a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = bundle.dim();
    let c = (n * (n - 1)) as f64;
    let r = bundle.scalar_curvature;
    let nabla_r = bundle.nabla_scalar.as_ref().expect("first derivatives required");
    (0..n).map(|m| b[m] - r * a[m] / c + nabla_r[m] / c).collect()
}

fn side_values(
    bundle: &CurvatureBundle,
    id: ConditionId,
    fit: &FitResult<Jet>,
) -> Result<FormSideValues, GeometryError> {
    let mut side = FormSideValues::default();
    if !id.has_one_forms() || matches!(fit.verdict.reason(), Some(DegenerateReason::ZeroTarget | DegenerateReason::SingularGram)) {
        return Ok(side);
    }
    let fd = differentiate_forms(bundle, &fit.forms)?;
    let r = bundle.scalar_curvature;
    let nabla_r = bundle.nabla_scalar.as_ref().expect("first derivatives required");
    let diff: Vec<f64> = nabla_r.iter().zip(&fd.a).map(|(g, a)| g - r * a).collect();
    side.nabla_r_minus_ra = Some(frobenius(&diff));
    side.nabla_a_plus_aa = Some(fd.second_coefficient_a().norm());
    side.dbar_a = Some(fd.dbar_a().norm());
    if let Some(c) = fd.second_coefficient_b() {
        side.nabla_b_plus_ab = Some(c.norm());
        side.dbar_b_plus_a_wedge_b = fd.dbar_b_plus_wedge().map(|t| t.norm());
    }
    if id == ConditionId::GCF {
        side.b1 = fd.b.as_ref().map(|b| frobenius(&b1_form(bundle, &fd.a, b)));
    }
    Ok(side)
}

/// Target, companion and derivative tensors of a family.
pub struct FamilyTensors<'a> {
    pub target: &'a Tensor<Jet>,
    pub companion: &'a Tensor<Jet>,
    pub first: &'a Tensor<Jet>,
    pub second: &'a Tensor<Jet>,
}

pub fn family_tensors(bundle: &CurvatureBundle, family: Family) -> FamilyTensors<'_> {
    let j = &bundle.jets;
    let req = "classification needs second derivatives";
    match family {
        Family::Curvature => FamilyTensors {
            target: &j.curvature,
            companion: &j.gten,
            first: j.nabla_curvature.as_ref().expect(req),
            second: j.nabla2_curvature.as_ref().expect(req),
        },
        Family::Ricci => FamilyTensors {
            target: &j.ric,
            companion: &j.g,
            first: j.nabla_ric.as_ref().expect(req),
            second: j.nabla2_ric.as_ref().expect(req),
        },
        Family::Concircular => FamilyTensors {
            target: &j.cten,
            companion: &j.gten,
            first: j.nabla_cten.as_ref().expect(req),
            second: j.nabla2_cten.as_ref().expect(req),
        },
    }
}

/// Fit of one condition at one point.
#[derive(Debug, Clone)]
pub struct PointFit {
    pub id: ConditionId,
    pub fit: FitResult<Jet>,
    pub side: FormSideValues,
}

/// Everything computed at one sample point.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    /// Position of the point in the input sample list.
    pub index: usize,
    pub bundle: CurvatureBundle,
    /// One entry per condition, in [`ConditionId::ALL`] order.
    pub fits: Vec<PointFit>,
}

impl PointAnalysis {
    pub fn fit(&self, id: ConditionId) -> &PointFit {
        &self.fits[id.index()]
    }
}

/// Runs all fifteen condition fits on a bundle computed at depth second.
pub fn analyze_bundle(bundle: CurvatureBundle, index: usize, tol: &Tolerances) -> Result<PointAnalysis, GeometryError> {
    if bundle.depth < Depth::Second {
        return Err(GeometryError::OrderTooLow { depth: Depth::Second, order: bundle.order, required: Depth::Second.min_order() });
    }
    let mut fits = Vec::with_capacity(15);
    for id in ConditionId::ALL {
        let ft = family_tensors(&bundle, id.family());
        let k = ft.target.len();
        let t = ft.target.data();
        let u = ft.companion.data();
        let d1: Vec<&[Jet]> = ft.first.data().chunks(k).collect();
        let d2: Vec<&[Jet]> = ft.second.data().chunks(k).collect();
        let fit = match id.kind() {
            Kind::Symmetric => fit_symmetric(&d1, t, tol),
            Kind::Recurrent => fit_proportional(&d1, t, tol),
            Kind::SecondOrder => fit_proportional(&d2, t, tol),
            Kind::Generalized => fit_affine(&d1, t, u, tol),
            Kind::GeneralizedSecondOrder => fit_affine(&d2, t, u, tol),
        };
        let side = side_values(&bundle, id, &fit)?;
        fits.push(PointFit { id, fit, side });
    }
    Ok(PointAnalysis { index, bundle, fits })
}

/// Norms of the main tensors at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub scalar_curvature: f64,
    pub norm_curvature: f64,
    pub norm_ric: f64,
    pub norm_cten: f64,
    pub norm_rhat: f64,
    pub norm_nabla_scalar: f64,
}

impl PointSummary {
    pub fn from_bundle(b: &CurvatureBundle) -> Self {
        PointSummary {
            x: b.point.x.clone(),
            y: b.point.y.clone(),
            scalar_curvature: b.scalar_curvature,
            norm_curvature: b.curvature.norm(),
            norm_ric: b.ric.norm(),
            norm_cten: b.cten.norm(),
            norm_rhat: b.rhat.norm(),
            norm_nabla_scalar: b.nabla_scalar.as_ref().map_or(0.0, |v| frobenius(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFitReport {
    pub verdict: Verdict,
    pub residual: f64,
    pub target_norm: f64,
    /// Form values at the point: `[A]`, `[A, B]`, `[α]` or `[α, μ]` (two-forms flattened `[m1][m2]`).
    pub forms: Vec<Vec<f64>>,
    pub side: FormSideValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub verdict: Verdict,
    /// Largest per-point residual.
    pub residual: f64,
    pub points: Vec<PointFitReport>,
}

/// Plain-valued classification result; everything the implication rules need.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub n: usize,
    pub tolerances: Tolerances,
    pub points: Vec<PointSummary>,
    /// All fifteen conditions in [`ConditionId::ALL`] order.
    pub conditions: Vec<ConditionReport>,
}

impl RecurrenceReport {
    pub fn from_analyses(n: usize, tol: Tolerances, analyses: &[PointAnalysis]) -> Self {
        let points = analyses.iter().map(|a| PointSummary::from_bundle(&a.bundle)).collect();
        let conditions = ConditionId::ALL
            .into_iter()
            .map(|id| {
                let per: Vec<PointFitReport> = analyses
                    .iter()
                    .map(|a| {
                        let pf = a.fit(id);
                        PointFitReport {
                            verdict: pf.fit.verdict,
                            residual: pf.fit.residual,
                            target_norm: pf.fit.target_norm,
                            forms: pf.fit.forms.iter().map(|f| values(f)).collect(),
                            side: pf.side.clone(),
                        }
                    })
                    .collect();
                let verdicts: Vec<Verdict> = per.iter().map(|p| p.verdict).collect();
                ConditionReport {
                    id,
                    verdict: aggregate(&verdicts),
                    residual: per.iter().fold(0.0, |m, p| m.max(p.residual)),
                    points: per,
                }
            })
            .collect();
        RecurrenceReport { n, tolerances: tol, points, conditions }
    }

    pub fn condition(&self, id: ConditionId) -> &ConditionReport {
        &self.conditions[id.index()]
    }

    pub fn verdict(&self, id: ConditionId) -> Verdict {
        self.condition(id).verdict
    }

    pub fn all_degenerate(&self) -> bool {
        self.conditions.iter().all(|c| matches!(c.verdict, Verdict::Degenerate(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecurrenceError {
    #[error("recurrence conditions need dimension n >= 3, got {0}")]
    Dimension(usize),
    #[error("no sample points supplied")]
    NoSamples,
    #[error("all {count} sample points were rejected (first: {first})")]
    NoValidPoints { count: usize, first: String },
}

/// Classification with the per-point jet data retained.
#[derive(Debug, Clone)]
pub struct Classification {
    pub report: RecurrenceReport,
    pub analyses: Vec<PointAnalysis>,
    /// Input points that could not be evaluated, with the reason.
    pub rejected: Vec<(usize, String)>,
}

pub fn classify(m: &FinslerMetric, samples: &[TMPoint], tol: &Tolerances) -> Result<Classification, RecurrenceError> {
    classify_with_order(m, samples, tol, JetConfig::DEFAULT_ORDER)
}

/// Evaluates every condition at every sample point (in parallel) and
/// aggregates the verdicts in input order.
pub fn classify_with_order(
    m: &FinslerMetric,
    samples: &[TMPoint],
    tol: &Tolerances,
    order: usize,
) -> Result<Classification, RecurrenceError> {
    if m.dim() < 3 {
        return Err(RecurrenceError::Dimension(m.dim()));
    }
    if samples.is_empty() {
        return Err(RecurrenceError::NoSamples);
    }
    let results: Vec<Result<PointAnalysis, GeometryError>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, p)| analyze_bundle(geometry::curvature_with_order(m, p, Depth::Second, order)?, i, tol))
        .collect();
    let mut analyses = Vec::new();
    let mut rejected = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(a) => analyses.push(a),
            Err(e) => rejected.push((i, e.to_string())),
        }
    }
    if analyses.is_empty() {
        return Err(RecurrenceError::NoValidPoints { count: samples.len(), first: rejected[0].1.clone() });
    }
    let report = RecurrenceReport::from_analyses(m.dim(), *tol, &analyses);
    Ok(Classification { report, analyses, rejected })
}

/// Consequence of a recurrence condition checked as a residual at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawCheck {
    pub id: &'static str,
    pub premise: &'static str,
    /// Premise holds (aggregated) and any extra hypothesis holds at this point.
    pub applicable: bool,
    pub residual: f64,
    /// Norm of the auxiliary form the law predicts, where there is one.
    pub predicted_form_norm: Option<f64>,
}

fn outer_residual(d: &Tensor<f64>, terms: &[(&[f64], &Tensor<f64>)]) -> f64 {
    let k = terms[0].1.len();
    let rows: Vec<Vec<f64>> = d.data().chunks(k).map(<[f64]>::to_vec).collect();
    let terms: Vec<(&[f64], &[f64])> = terms.iter().map(|(c, t)| (*c, t.data())).collect();
    relative_residual(&rows, &terms, d.norm())
}

/// `(A∘Ric_o)_j = A_i gⁱᵏ Ric_kj`.
pub fn compose_ricci_operator(bundle: &CurvatureBundle, a: &[f64]) -> Vec<f64> {
    let n = bundle.dim();
    (0..n)
        .map(|j| {
            (0..n)
                .flat_map(|i| (0..n).map(move |k| (i, k)))
                .map(|(i, k)| a[i] * bundle.g_inv.get(&[i, k]) * bundle.ric.get(&[k, j]))
                .sum()
        })
        .collect()
}

/// Checks the consequences that follow when F, GF or GCF hold, reusing the fitted forms
/// instead of refitting.
pub fn theorem_laws(analysis: &PointAnalysis, report: &RecurrenceReport) -> Result<Vec<LawCheck>, GeometryError> {
    let b = &analysis.bundle;
    let n = b.dim();
    let tol = &report.tolerances;
    let nn1 = (n * (n - 1)) as f64;
    let r = b.scalar_curvature;
    let nabla_r = b.nabla_scalar.as_ref().expect("first derivatives required");
    let (nabla_curv, nabla2_curv) = (b.nabla_curvature.as_ref().unwrap(), b.nabla2_curvature.as_ref().unwrap());
    let nabla_ric = b.nabla_ric.as_ref().unwrap();
    let flat2 = |t: &Tensor<f64>| t.data().to_vec();
    let mut out = Vec::new();

    let f_holds = report.verdict(ConditionId::F).holds();
    let fd = differentiate_forms(b, &analysis.fit(ConditionId::F).fit.forms)?;
    out.push(LawCheck {
        id: "recurrent_implies_ricci_recurrent",
        premise: "F",
        applicable: f_holds,
        residual: outer_residual(nabla_ric, &[(&fd.a, &b.ric)]),
        predicted_form_norm: None,
    });
    out.push(LawCheck {
        id: "recurrent_implies_concircular_recurrent",
        premise: "F",
        applicable: f_holds && r.abs() > 1e-8,
        residual: outer_residual(b.nabla_cten.as_ref().unwrap(), &[(&fd.a, &b.cten)]),
        predicted_form_norm: None,
    });
    let alpha = flat2(&fd.second_coefficient_a());
    out.push(LawCheck {
        id: "recurrent_second_derivative",
        premise: "F",
        applicable: f_holds,
        residual: outer_residual(nabla2_curv, &[(&alpha, &b.curvature)]),
        predicted_form_norm: Some(frobenius(&alpha)),
    });

    let gf_holds = report.verdict(ConditionId::GF).holds();
    let gd = differentiate_forms(b, &analysis.fit(ConditionId::GF).fit.forms)?;
    let galpha = flat2(&gd.second_coefficient_a());
    let gmu = flat2(&gd.second_coefficient_b().unwrap());
    out.push(LawCheck {
        id: "generalized_second_derivative",
        premise: "GF",
        applicable: gf_holds,
        residual: outer_residual(nabla2_curv, &[(&galpha, &b.curvature), (&gmu, &b.gten)]),
        predicted_form_norm: Some(frobenius(&gmu)),
    });
    let gb = gd.b.as_ref().unwrap();
    let trace: Vec<f64> = (0..n).map(|m| nabla_r[m] - r * gd.a[m] - nn1 * gb[m]).collect();
    out.push(LawCheck {
        id: "generalized_scalar_trace",
        premise: "GF",
        applicable: gf_holds,
        residual: frobenius(&trace) / r.abs().max(1.0),
        predicted_form_norm: None,
    });

    let gcf_holds = report.verdict(ConditionId::GCF).holds();
    let cd = differentiate_forms(b, &analysis.fit(ConditionId::GCF).fit.forms)?;
    let cb = cd.b.as_ref().unwrap();
    let b1 = b1_form(b, &cd.a, cb);
    out.push(LawCheck {
        id: "concircular_generalized_curvature",
        premise: "GCF",
        applicable: gcf_holds,
        residual: outer_residual(nabla_curv, &[(&cd.a, &b.curvature), (&b1, &b.gten)]),
        predicted_form_norm: Some(frobenius(&b1)),
    });
    let b1_ric: Vec<f64> = b1.iter().map(|v| (n - 1) as f64 * v).collect();
    out.push(LawCheck {
        id: "concircular_generalized_ricci",
        premise: "GCF",
        applicable: gcf_holds,
        residual: outer_residual(nabla_ric, &[(&cd.a, &b.ric), (&b1_ric, &b.g)]),
        predicted_form_norm: Some(frobenius(&b1_ric)),
    });
    let constant_r = frobenius(nabla_r) / r.abs().max(1.0) < tol.eps_fit;
    let integrable = b.rhat.norm() <= tol.eps_form * ((n * n * n) as f64).sqrt();
    let a_ric = compose_ricci_operator(b, &cd.a);
    let dform: Vec<f64> = (0..n).map(|m| 0.5 * nn1 * cb[m] - a_ric[m]).collect();
    out.push(LawCheck {
        id: "constant_scalar_generalized_ricci",
        premise: "GCF",
        applicable: gcf_holds && constant_r && integrable,
        residual: outer_residual(nabla_ric, &[(&cd.a, &b.ric), (&dform, &b.g)]),
        predicted_form_norm: Some(frobenius(&dform)),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn proportional_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_vec(&mut rng, 81);
        let a = random_vec(&mut rng, 3);
        let d: Vec<Vec<f64>> = a.iter().map(|am| t.iter().map(|tk| am * tk).collect()).collect();
        let rows: Vec<&[f64]> = d.iter().map(Vec::as_slice).collect();
        let fit = fit_proportional(&rows, &t, &Tolerances::default());
        assert_eq!(fit.verdict, Verdict::Holds);
        assert!(fit.residual < 1e-14);
        for (x, y) in fit.forms[0].iter().zip(&a) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_recovery_and_parallel_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_vec(&mut rng, 27);
        let u = random_vec(&mut rng, 27);
        let (a, b) = (random_vec(&mut rng, 3), random_vec(&mut rng, 3));
        let d: Vec<Vec<f64>> = (0..3).map(|m| (0..27).map(|k| a[m] * t[k] + b[m] * u[k]).collect()).collect();
        let rows: Vec<&[f64]> = d.iter().map(Vec::as_slice).collect();
        let fit = fit_affine(&rows, &t, &u, &Tolerances::default());
        assert_eq!(fit.verdict, Verdict::Holds);
        for m in 0..3 {
            assert!((fit.forms[0][m] - a[m]).abs() < 1e-12);
            assert!((fit.forms[1][m] - b[m]).abs() < 1e-12);
        }
        let u2: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        let fit = fit_affine(&rows, &t, &u2, &Tolerances::default());
        assert_eq!(fit.verdict, Verdict::Degenerate(DegenerateReason::SingularGram));
    }

    #[test]
    fn zero_target_and_symmetric_flags() {
        let t = vec![0.0; 9];
        let d = [vec![1.0; 9]];
        let rows: Vec<&[f64]> = d.iter().map(Vec::as_slice).collect();
        let fit = fit_proportional(&rows, &t, &Tolerances::default());
        assert_eq!(fit.verdict, Verdict::Degenerate(DegenerateReason::ZeroTarget));
        let t = vec![1.0; 9];
        let d = [vec![1e-12; 9]];
        let rows: Vec<&[f64]> = d.iter().map(Vec::as_slice).collect();
        let fit = fit_proportional(&rows, &t, &Tolerances::default());
        assert!(fit.symmetric);
        assert_eq!(fit.verdict, Verdict::Degenerate(DegenerateReason::ZeroForm));
        assert_eq!(fit_symmetric(&rows, &t, &Tolerances::default()).verdict, Verdict::Holds);
    }

    #[test]
    fn aggregation_rules() {
        use DegenerateReason::*;
        assert_eq!(aggregate(&[Verdict::Holds, Verdict::Holds]), Verdict::Holds);
        assert_eq!(aggregate(&[Verdict::Holds, Verdict::Degenerate(ZeroForm)]), Verdict::Fails);
        assert_eq!(
            aggregate(&[Verdict::Degenerate(ZeroForm), Verdict::Degenerate(ZeroTarget)]),
            Verdict::Degenerate(ZeroTarget)
        );
    }

    #[test]
    fn condition_table() {
        assert_eq!(ConditionId::ALL.len(), 15);
        for id in ConditionId::ALL {
            assert_eq!(ConditionId::from_name(id.name()), Some(id));
        }
        assert_eq!(ConditionId::G2RF.family(), Family::Ricci);
        assert_eq!(ConditionId::CF2.kind(), Kind::SecondOrder);
        assert!((gram_condition(1.0, 0.0, 4.0) - 4.0).abs() < 1e-15);
    }
}
